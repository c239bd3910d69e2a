//! Gate implementations as quantum channels.
//!
//! An implementation is an ancilla state together with a joint unitary on
//! qubit (x) ancilla. It induces the channel
//! `rho -> Tr_A[U (rho (x) rho_A) U^dag]`, whose worst-case overlap with a
//! target gate is the gate fidelity. This module also builds the deviation
//! operators whose fluctuations lower-bound the infidelity, and the
//! purification that reduces mixed ancillas to pure ones.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{rotated_frame, ConservedLaw, GateSpec};
use crate::bounds::{v_vector, w_vector};
use crate::error::{invalid, Result};
use crate::linalg::{
    basis_vector, c64, hermitian_eig, inner, kron, kron_vec, norm, operator_norm,
    partial_trace_ancilla, pauli_coefficients, pauli_x, pauli_y, pauli_z, real, ComplexMatrix,
    HERMITIAN_TOL, UNITARY_TOL, ZERO,
};

const STATE_NORM_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-10;
/// Eigenvalues of a density matrix at or below this are dropped when
/// purifying.
const RANK_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum AncillaState {
    Pure(Vec<Complex64>),
    Mixed(ComplexMatrix),
}

impl AncillaState {
    pub fn dim(&self) -> usize {
        match self {
            AncillaState::Pure(v) => v.len(),
            AncillaState::Mixed(m) => m.rows(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, AncillaState::Pure(_))
    }

    pub fn density(&self) -> ComplexMatrix {
        match self {
            AncillaState::Pure(v) => ComplexMatrix::outer(v, v),
            AncillaState::Mixed(m) => m.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AncillaState::Pure(v) => {
                if v.is_empty() {
                    return invalid("ancilla state is empty");
                }
                let n = norm(v);
                if (n - 1.0).abs() > STATE_NORM_TOL {
                    return invalid(format!("ancilla state has norm {n}, expected 1"));
                }
            }
            AncillaState::Mixed(m) => validate_density(m, "ancilla density matrix")?,
        }
        Ok(())
    }

    /// `Tr(rho X)`, real part.
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        match self {
            AncillaState::Pure(v) => op.expectation(v).re,
            AncillaState::Mixed(m) => (m * op).trace().re,
        }
    }
}

fn validate_density(m: &ComplexMatrix, what: &str) -> Result<()> {
    if !m.is_square() || m.rows() == 0 {
        return invalid(format!("{what} must be a non-empty square matrix"));
    }
    if !m.is_hermitian(HERMITIAN_TOL) {
        return invalid(format!("{what} is not Hermitian"));
    }
    let tr = m.trace().re;
    if (tr - 1.0).abs() > STATE_NORM_TOL {
        return invalid(format!("{what} has trace {tr}, expected 1"));
    }
    let lowest = hermitian_eig(m)?.values[0];
    if lowest < -POSITIVITY_TOL {
        return invalid(format!("{what} has negative eigenvalue {lowest:e}"));
    }
    Ok(())
}

/// Ancilla state plus joint unitary on qubit (x) ancilla.
#[derive(Debug, Clone, PartialEq)]
pub struct Implementation {
    ancilla_state: AncillaState,
    joint_unitary: ComplexMatrix,
}

impl Implementation {
    pub fn new(ancilla_state: AncillaState, joint_unitary: ComplexMatrix) -> Result<Self> {
        ancilla_state.validate()?;
        let da = ancilla_state.dim();
        if joint_unitary.rows() != 2 * da || joint_unitary.cols() != 2 * da {
            return invalid(format!(
                "joint unitary must be {0}x{0} for a {da}-dimensional ancilla, got {1}x{2}",
                2 * da,
                joint_unitary.rows(),
                joint_unitary.cols()
            ));
        }
        let err = joint_unitary.unitarity_error();
        if err > UNITARY_TOL {
            return invalid(format!("joint evolution is not unitary (max |U^dag U - I| = {err:e})"));
        }
        Ok(Self {
            ancilla_state,
            joint_unitary,
        })
    }

    pub fn pure(ancilla: Vec<Complex64>, joint_unitary: ComplexMatrix) -> Result<Self> {
        Self::new(AncillaState::Pure(ancilla), joint_unitary)
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_state.dim()
    }

    pub fn ancilla_state(&self) -> &AncillaState {
        &self.ancilla_state
    }

    pub fn joint_unitary(&self) -> &ComplexMatrix {
        &self.joint_unitary
    }

    /// Kraus operators of the induced channel. For a pure ancilla `|A>` these
    /// are `(I (x) <a|) U (I (x) |A>)`; a mixed ancilla contributes one set per
    /// eigenvector, weighted by the square root of its eigenvalue.
    pub fn kraus_operators(&self) -> Vec<ComplexMatrix> {
        let da = self.ancilla_dim();
        let u = &self.joint_unitary;
        let weighted: Vec<(f64, Vec<Complex64>)> = match &self.ancilla_state {
            AncillaState::Pure(v) => vec![(1.0, v.clone())],
            AncillaState::Mixed(m) => {
                let eig = hermitian_eig(m).expect("validated density matrix");
                eig.values
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > RANK_CUTOFF)
                    .map(|(k, &p)| (p, eig.vectors.column(k)))
                    .collect()
            }
        };
        let mut out = Vec::with_capacity(weighted.len() * da);
        for (p, state) in &weighted {
            let amp = p.sqrt();
            for a in 0..da {
                out.push(ComplexMatrix::from_fn(2, 2, |s, t| {
                    let mut acc = ZERO;
                    for (b, &sb) in state.iter().enumerate() {
                        acc += u[(s * da + a, t * da + b)] * sb;
                    }
                    acc * amp
                }));
            }
        }
        out
    }

    /// Equivalent implementation with a pure state on ancilla (x) auxiliary
    /// and evolution `U (x) I_B`. A pure ancilla is returned unchanged with
    /// auxiliary dimension 1.
    pub fn purified(&self) -> Result<(Implementation, usize)> {
        match &self.ancilla_state {
            AncillaState::Pure(_) => Ok((self.clone(), 1)),
            AncillaState::Mixed(m) => {
                let p = purify(m)?;
                let u = kron(&self.joint_unitary, &ComplexMatrix::identity(p.aux_dim));
                Ok((Implementation::pure(p.vector, u)?, p.aux_dim))
            }
        }
    }
}

/// `Tr_A[U (rho_s (x) rho_A) U^dag]`
pub fn apply_channel(imp: &Implementation, rho_s: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho_s.rows() != 2 || rho_s.cols() != 2 {
        return invalid(format!("input state must be 2x2, got {}x{}", rho_s.rows(), rho_s.cols()));
    }
    let da = imp.ancilla_dim();
    let joint = kron(rho_s, &imp.ancilla_state.density());
    let u = &imp.joint_unitary;
    let evolved = &(u * &joint) * &u.adjoint();
    partial_trace_ancilla(&evolved, 2, da)
}

/// `<psi| U_S^dag E(|psi><psi|) U_S |psi>^{1/2}`
pub fn state_fidelity(imp: &Implementation, target: &GateSpec, psi: &[Complex64]) -> Result<f64> {
    if psi.len() != 2 {
        return invalid("input must be a qubit state");
    }
    let psi = crate::linalg::normalize(psi)?;
    let out = apply_channel(imp, &ComplexMatrix::outer(&psi, &psi))?;
    let ideal = target.matrix().mat_vec(&psi);
    let overlap = out.expectation(&ideal).re;
    Ok(overlap.max(0.0).sqrt().min(1.0))
}

/// `cos(zeta)|0> + e^{i delta} sin(zeta)|1>`
pub fn qubit_state(zeta: f64, delta: f64) -> [Complex64; 2] {
    [real(zeta.cos()), Complex64::from_polar(zeta.sin(), delta)]
}

/// Bloch vector of [`qubit_state`].
pub fn bloch_vector(zeta: f64, delta: f64) -> [f64; 3] {
    let (s2, c2) = (2.0 * zeta).sin_cos();
    [s2 * delta.cos(), s2 * delta.sin(), c2]
}

/// Function on the Bloch sphere of the form `(k + q.r + r^T Q r) / 4`.
///
/// The squared state fidelity and the moments of a reduced operator both
/// have this shape, which makes grid scans cheap.
#[derive(Debug, Clone, Copy)]
pub struct BlochQuadratic {
    constant: f64,
    linear: [f64; 3],
    quadratic: [[f64; 3]; 3],
}

impl BlochQuadratic {
    /// `sum_K |<psi| M_K |psi>|^2`
    pub fn sum_of_squared_expectations(ms: &[ComplexMatrix]) -> Self {
        let mut constant = 0.0;
        let mut linear = [0.0; 3];
        let mut quadratic = [[0.0; 3]; 3];
        let paulis = [pauli_x(), pauli_y(), pauli_z()];
        for m in ms {
            let a = m.trace();
            let b: [Complex64; 3] = std::array::from_fn(|k| (m * &paulis[k]).trace());
            constant += a.norm_sqr();
            for i in 0..3 {
                linear[i] += 2.0 * (a.conj() * b[i]).re;
                for j in 0..3 {
                    quadratic[i][j] += (b[i].conj() * b[j]).re;
                }
            }
        }
        Self {
            constant,
            linear,
            quadratic,
        }
    }

    pub fn eval(&self, r: [f64; 3]) -> f64 {
        let mut acc = self.constant;
        for i in 0..3 {
            acc += self.linear[i] * r[i];
            for j in 0..3 {
                acc += self.quadratic[i][j] * r[i] * r[j];
            }
        }
        0.25 * acc
    }

    pub fn eval_angles(&self, zeta: f64, delta: f64) -> f64 {
        self.eval(bloch_vector(zeta, delta))
    }
}

/// Squared state fidelity `F(psi)^2` as a function on the Bloch sphere.
pub fn fidelity_landscape(imp: &Implementation, target: &GateSpec) -> BlochQuadratic {
    let us_dag = target.matrix().adjoint();
    let ms: Vec<ComplexMatrix> = imp.kraus_operators().iter().map(|k| &us_dag * k).collect();
    BlochQuadratic::sum_of_squared_expectations(&ms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityOptions {
    pub zeta_points: usize,
    pub delta_points: usize,
    /// Objective tolerance for the local refinement.
    pub tolerance: f64,
    pub max_refinement_sweeps: usize,
}

impl Default for FidelityOptions {
    fn default() -> Self {
        Self {
            zeta_points: 64,
            delta_points: 128,
            tolerance: 1e-9,
            max_refinement_sweeps: 200,
        }
    }
}

impl FidelityOptions {
    /// Cheaper settings for inner loops of an optimizer.
    pub fn coarse() -> Self {
        Self {
            zeta_points: 16,
            delta_points: 32,
            tolerance: 1e-7,
            max_refinement_sweeps: 30,
        }
    }

    pub fn zeta_at(&self, i: usize) -> f64 {
        FRAC_PI_2 * i as f64 / (self.zeta_points - 1) as f64
    }

    pub fn delta_at(&self, j: usize) -> f64 {
        TAU * j as f64 / self.delta_points as f64
    }

    fn validate(&self) {
        assert!(self.zeta_points >= 2 && self.delta_points >= 1, "fidelity grid too small");
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateAngles {
    pub zeta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub worst_fidelity: f64,
    pub argmin_state: StateAngles,
    pub grid_resolution: [usize; 2],
    pub refinement_iterations: usize,
    /// Grid minimum minus refined minimum of the fidelity.
    pub certified_gap: f64,
}

impl FidelityResult {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.worst_fidelity * self.worst_fidelity
    }
}

/// Probe grid of [`FidelityOptions`] with its Bloch vectors precomputed, so
/// repeated scans of quadratic landscapes need no trigonometry.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    opts: FidelityOptions,
    bloch: Vec<[f64; 3]>,
}

impl SphereGrid {
    pub fn new(opts: FidelityOptions) -> Self {
        opts.validate();
        let mut bloch = Vec::with_capacity(opts.zeta_points * opts.delta_points);
        for i in 0..opts.zeta_points {
            for j in 0..opts.delta_points {
                bloch.push(bloch_vector(opts.zeta_at(i), opts.delta_at(j)));
            }
        }
        Self { opts, bloch }
    }

    pub fn options(&self) -> &FidelityOptions {
        &self.opts
    }

    /// Grid minimum of `f`, ties broken by first occurrence in row-major
    /// order.
    fn argmin(&self, f: impl Fn([f64; 3]) -> f64) -> (f64, usize, usize) {
        let mut best = (f64::INFINITY, 0);
        for (k, &r) in self.bloch.iter().enumerate() {
            let val = f(r);
            if val < best.0 {
                best = (val, k);
            }
        }
        let nd = self.opts.delta_points;
        (best.0, best.1 / nd, best.1 % nd)
    }

    /// Grid maximum of `f`.
    pub fn max(&self, f: impl Fn([f64; 3]) -> f64) -> f64 {
        self.bloch.iter().map(|&r| f(r)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid scan followed by coordinate-wise golden-section refinement on the
    /// `(zeta, delta)` chart. Returns `(min, argmin, grid_min, sweeps)`.
    pub fn minimize(&self, f: impl Fn([f64; 3]) -> f64) -> (f64, StateAngles, f64, usize) {
        let opts = &self.opts;
        let (grid_min, i, j) = self.argmin(&f);
        let g = |z: f64, d: f64| f(bloch_vector(z, d));
        let mut zeta = opts.zeta_at(i);
        let mut delta = opts.delta_at(j);
        let mut best = grid_min;
        let h_zeta = FRAC_PI_2 / (opts.zeta_points - 1) as f64;
        let h_delta = TAU / opts.delta_points as f64;
        let x_tol = 1e-11;
        let mut sweeps = 0;
        while sweeps < opts.max_refinement_sweeps {
            sweeps += 1;
            let before = best;
            let (z, fz) = golden_section((zeta - h_zeta).max(0.0), (zeta + h_zeta).min(FRAC_PI_2), x_tol, |z| g(z, delta));
            if fz < best {
                best = fz;
                zeta = z;
            }
            let (d, fd) = golden_section(delta - h_delta, delta + h_delta, x_tol, |d| g(zeta, d));
            if fd < best {
                best = fd;
                delta = d.rem_euclid(TAU);
            }
            if before - best <= opts.tolerance * 1e-3 {
                break;
            }
        }
        (best, StateAngles { zeta, delta }, grid_min, sweeps)
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn golden_section(mut lo: f64, mut hi: f64, x_tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > x_tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Infimum of the state fidelity over pure inputs.
pub fn worst_case_fidelity(imp: &Implementation, target: &GateSpec, opts: &FidelityOptions) -> FidelityResult {
    worst_case_fidelity_on(&SphereGrid::new(*opts), imp, target)
}

/// [`worst_case_fidelity`] on a prebuilt grid.
pub fn worst_case_fidelity_on(grid: &SphereGrid, imp: &Implementation, target: &GateSpec) -> FidelityResult {
    let landscape = fidelity_landscape(imp, target);
    let (min_sq, argmin, grid_min_sq, sweeps) = grid.minimize(|r| landscape.eval(r));
    let to_fidelity = |x: f64| x.clamp(0.0, 1.0).sqrt();
    let worst = to_fidelity(min_sq);
    FidelityResult {
        worst_fidelity: worst,
        argmin_state: argmin,
        grid_resolution: [grid.opts.zeta_points, grid.opts.delta_points],
        refinement_iterations: sweeps,
        certified_gap: to_fidelity(grid_min_sq) - worst,
    }
}

/// `|| [U, L] ||` with `L = L_S (x) I + I (x) L_A`.
///
/// Panics if the law's ancilla operator does not match the implementation.
pub fn conservation_residual(imp: &Implementation, law: &ConservedLaw) -> f64 {
    assert_eq!(
        law.ancilla_dim(),
        imp.ancilla_dim(),
        "conservation law and implementation disagree on ancilla dimension"
    );
    unitary_conservation_residual(&imp.joint_unitary, law)
}

pub fn unitary_conservation_residual(u: &ComplexMatrix, law: &ConservedLaw) -> f64 {
    operator_norm(&u.commutator(&law.total_operator()))
}

/// `sigma(L_A / c)` in the given ancilla state.
pub fn sigma_ancilla(state: &AncillaState, law: &ConservedLaw) -> f64 {
    let la = &law.ancilla_operator;
    let mean = state.expectation(la);
    let second = state.expectation(&(la * la));
    (second - mean * mean).max(0.0).sqrt() / law.c
}

/// `U^dag (A (x) I) U - U_S^dag A U_S (x) I` for a qubit observable `A`.
pub fn deviation_operator(imp: &Implementation, target: &GateSpec, observable: &ComplexMatrix) -> ComplexMatrix {
    let da = imp.ancilla_dim();
    let id_a = ComplexMatrix::identity(da);
    let u = &imp.joint_unitary;
    let us = target.matrix();
    let heisenberg = &(&u.adjoint() * &kron(observable, &id_a)) * u;
    let ideal = &(&us.adjoint() * observable) * &us;
    &heisenberg - &kron(&ideal, &id_a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    /// `<D^2>`
    pub mean_square: f64,
    /// `sigma(D)^2`
    pub variance: f64,
    /// `<[D, L]>`
    pub commutator_expectation: Complex64,
    /// `sigma(D) sigma(L) - |<[D, L]>| / 2`
    pub robertson_slack: f64,
}

fn require_pure(imp: &Implementation) -> Result<&[Complex64]> {
    match &imp.ancilla_state {
        AncillaState::Pure(v) => Ok(v),
        AncillaState::Mixed(_) => invalid("a pure ancilla is required here; purify the implementation first"),
    }
}

/// Moments of the deviation operator of `L_S` in `psi (x) A`.
pub fn deviation_report(
    imp: &Implementation,
    target: &GateSpec,
    law: &ConservedLaw,
    psi: &[Complex64],
) -> Result<DeviationReport> {
    let ancilla = require_pure(imp)?;
    if psi.len() != 2 {
        return invalid("input must be a qubit state");
    }
    let psi = crate::linalg::normalize(psi)?;
    let state = kron_vec(&psi, ancilla);
    let d = deviation_operator(imp, target, &law.qubit_operator());
    let l = law.total_operator();

    let d_state = d.mat_vec(&state);
    let mean_square = norm(&d_state).powi(2);
    let mean = inner(&state, &d_state).re;
    let variance = (mean_square - mean * mean).max(0.0);

    let l_state = l.mat_vec(&state);
    let l_mean = inner(&state, &l_state).re;
    let l_var = (norm(&l_state).powi(2) - l_mean * l_mean).max(0.0);

    let commutator_expectation = d.commutator(&l).expectation(&state);
    let robertson_slack = variance.sqrt() * l_var.sqrt() - 0.5 * commutator_expectation.norm();
    Ok(DeviationReport {
        mean_square,
        variance,
        commutator_expectation,
        robertson_slack,
    })
}

/// Input and output bases adapted to `L_S`, and the cross amplitudes of the
/// joint evolution between them.
///
/// `chi[0]`, `chi[1]` are eigenvectors of `l.sigma` for `+1` and `-1`,
/// `xi[i] = U_S^dag chi[i]`, and
/// `amplitude_norm_sq[i][j] = || (<chi_j| (x) I) U (|xi_i> (x) |A>) ||^2`.
#[derive(Debug, Clone)]
pub struct DeviationBasis {
    pub chi: [Vec<Complex64>; 2],
    pub xi: [Vec<Complex64>; 2],
    pub amplitude_norm_sq: [[f64; 2]; 2],
    pub c: f64,
}

impl DeviationBasis {
    /// `cos(zeta)|xi_0> + e^{i delta} sin(zeta)|xi_1>`
    pub fn input_state(&self, zeta: f64, delta: f64) -> Vec<Complex64> {
        let phase = Complex64::from_polar(zeta.sin(), delta);
        self.xi[0]
            .iter()
            .zip(&self.xi[1])
            .map(|(a, b)| a * zeta.cos() + b * phase)
            .collect()
    }

    /// `4 c^2 (||A^0_1||^2 cos^2 zeta + ||A^1_0||^2 sin^2 zeta)`
    pub fn mean_square(&self, zeta: f64) -> f64 {
        let (s, c) = zeta.sin_cos();
        4.0 * self.c * self.c * (self.amplitude_norm_sq[0][1] * c * c + self.amplitude_norm_sq[1][0] * s * s)
    }
}

pub fn deviation_basis(imp: &Implementation, target: &GateSpec, law: &ConservedLaw) -> Result<DeviationBasis> {
    let ancilla = require_pure(imp)?;
    let da = imp.ancilla_dim();
    let eig = hermitian_eig(&crate::linalg::pauli_dot(law.direction))?;
    let chi = [eig.vectors.column(1), eig.vectors.column(0)];
    let us_dag = target.matrix().adjoint();
    let xi = [us_dag.mat_vec(&chi[0]), us_dag.mat_vec(&chi[1])];
    let mut amplitude_norm_sq = [[0.0; 2]; 2];
    for i in 0..2 {
        let out = imp.joint_unitary.mat_vec(&kron_vec(&xi[i], ancilla));
        for j in 0..2 {
            let mut total = 0.0;
            for a in 0..da {
                let amp: Complex64 = (0..2).map(|s| chi[j][s].conj() * out[s * da + a]).sum();
                total += amp.norm_sqr();
            }
            amplitude_norm_sq[i][j] = total;
        }
    }
    Ok(DeviationBasis {
        chi,
        xi,
        amplitude_norm_sq,
        c: law.c,
    })
}

/// `(1 - F^2) - sup_psi sigma(D)^2 / (4 c^2)`, with the supremum over the
/// same probe grid used for the fidelity. Non-negative up to numerical
/// slack for every implementation.
pub fn deviation_fidelity_gap(
    imp: &Implementation,
    target: &GateSpec,
    law: &ConservedLaw,
    opts: &FidelityOptions,
) -> Result<f64> {
    let ancilla = require_pure(imp)?;
    let d = deviation_operator(imp, target, &law.qubit_operator());
    let d2 = &d * &d;
    let first = reduce_on_ancilla(&d, ancilla);
    let second = reduce_on_ancilla(&d2, ancilla);
    let (m1, v1) = pauli_coefficients(&first);
    let (m2, v2) = pauli_coefficients(&second);
    let grid = SphereGrid::new(*opts);
    let sup_var = grid.max(|r| {
        let mean = m1 + v1[0] * r[0] + v1[1] * r[1] + v1[2] * r[2];
        let ms = m2 + v2[0] * r[0] + v2[1] * r[1] + v2[2] * r[2];
        (ms - mean * mean).max(0.0)
    });
    let fid = worst_case_fidelity_on(&grid, imp, target);
    Ok(fid.infidelity() - sup_var / (4.0 * law.c * law.c))
}

/// `(I (x) <A|) M (I (x) |A>)`, Hermitian-symmetrized.
fn reduce_on_ancilla(m: &ComplexMatrix, ancilla: &[Complex64]) -> ComplexMatrix {
    let da = ancilla.len();
    ComplexMatrix::from_fn(2, 2, |s, t| {
        let mut acc = ZERO;
        for a in 0..da {
            for b in 0..da {
                acc += ancilla[a].conj() * m[(s * da + a, t * da + b)] * ancilla[b];
            }
        }
        acc
    })
    .hermitian_part()
}

/// Deviation operators of the two transverse rotated-frame Paulis, with the
/// residuals of their commutation identities against `L`.
#[derive(Debug, Clone)]
pub struct RotatedDeviations {
    pub d1: ComplexMatrix,
    pub d2: ComplexMatrix,
    /// `||(1/c)[D1, L] + 2i(D2 + 2 U_S^dag l2 U_S (x) I + 2 v.sigma' (x) I)||`
    /// and `||(1/c)[D2, L] - 2i(D1 + 2 U_S^dag l1 U_S (x) I + 2 w.sigma' (x) I)||`.
    pub identity_residuals: [f64; 2],
}

pub fn rotated_deviations(imp: &Implementation, target: &GateSpec, law: &ConservedLaw) -> Result<RotatedDeviations> {
    let frame = rotated_frame(law, target)?;
    let psi = frame.cos_psi.acos();
    let da = imp.ancilla_dim();
    let id_a = ComplexMatrix::identity(da);
    let us = target.matrix();
    let conj = |m: &ComplexMatrix| kron(&(&(&us.adjoint() * m) * &us), &id_a);

    let d1 = deviation_operator(imp, target, &frame.l1);
    let d2 = deviation_operator(imp, target, &frame.l2);
    let l = law.total_operator();
    let two_i = c64(0.0, 2.0);

    let v_term = kron(&frame.dot(v_vector(target.theta, psi)), &id_a);
    let w_term = kron(&frame.dot(w_vector(target.theta, psi)), &id_a);

    let mut rhs1 = d2.clone();
    rhs1 += &conj(&frame.l2).scale_real(2.0);
    rhs1 += &v_term.scale_real(2.0);
    let lhs1 = d1.commutator(&l).scale_real(1.0 / law.c);
    let res1 = operator_norm(&(&lhs1 + &rhs1.scale(two_i)));

    let mut rhs2 = d1.clone();
    rhs2 += &conj(&frame.l1).scale_real(2.0);
    rhs2 += &w_term.scale_real(2.0);
    let lhs2 = d2.commutator(&l).scale_real(1.0 / law.c);
    let res2 = operator_norm(&(&lhs2 - &rhs2.scale(two_i)));

    Ok(RotatedDeviations {
        d1,
        d2,
        identity_residuals: [res1, res2],
    })
}

#[derive(Debug, Clone)]
pub struct Purification {
    /// Vector on ancilla (x) auxiliary, ancilla index major.
    pub vector: Vec<Complex64>,
    pub aux_dim: usize,
}

/// `|A'> = sum_k sqrt(p_k) |k> (x) |k>` over the support of `rho`; the
/// auxiliary dimension equals the rank.
pub fn purify(rho: &ComplexMatrix) -> Result<Purification> {
    validate_density(rho, "state to purify")?;
    let da = rho.rows();
    let eig = hermitian_eig(rho)?;
    let support: Vec<usize> = (0..da).filter(|&k| eig.values[k] > RANK_CUTOFF).collect();
    let aux_dim = support.len().max(1);
    let mut vector = vec![ZERO; da * aux_dim];
    for (slot, &k) in support.iter().enumerate() {
        let amp = eig.values[k].sqrt();
        for a in 0..da {
            vector[a * aux_dim + slot] += eig.vectors[(a, k)] * amp;
        }
    }
    let n = norm(&vector);
    for x in vector.iter_mut() {
        *x /= n;
    }
    Ok(Purification { vector, aux_dim })
}

/// Fixed informationally complete set of qubit inputs:
/// `|0>, |1>, |+>, |+i>`.
pub fn tomography_inputs() -> [ComplexMatrix; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let states = [
        basis_vector(2, 0),
        basis_vector(2, 1),
        vec![real(s), real(s)],
        vec![real(s), c64(0.0, s)],
    ];
    states.map(|v| ComplexMatrix::outer(&v, &v))
}

/// Largest entrywise difference between the direct mixed-ancilla channel and
/// the purified extension `(U (x) I_B, |A'>)` over [`tomography_inputs`].
pub fn mixed_channel_equivalence(imp: &Implementation) -> Result<f64> {
    let (extended, _) = imp.purified()?;
    let mut worst = 0.0f64;
    for rho in tomography_inputs() {
        let direct = apply_channel(imp, &rho)?;
        let via_purification = apply_channel(&extended, &rho)?;
        worst = worst.max(direct.max_abs_diff(&via_purification));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{decompose_gate, standard_conserved};
    use crate::linalg::{partial_trace_system, qr_positive, ONE};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn gaussian_matrix(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        qr_positive(&gaussian_matrix(rng, n)).unwrap().0
    }

    fn random_state(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
        let v: Vec<Complex64> = (0..n).map(|_| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        crate::linalg::normalize(&v).unwrap()
    }

    fn random_density(rng: &mut impl Rng, n: usize, rank: usize) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(n, rank, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let rho = &g * &g.adjoint();
        let tr = rho.trace().re;
        rho.scale_real(1.0 / tr).hermitian_part()
    }

    fn swap() -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(4, 4);
        m[(0, 0)] = ONE;
        m[(1, 2)] = ONE;
        m[(2, 1)] = ONE;
        m[(3, 3)] = ONE;
        m
    }

    fn random_gate(rng: &mut impl Rng) -> GateSpec {
        decompose_gate(&random_unitary(rng, 2)).unwrap()
    }

    #[test]
    fn decoupled_ancilla_gives_ideal_gate() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let us = random_unitary(&mut rng, 2);
        let u = kron(&us, &ComplexMatrix::identity(3));
        let rho_a = random_density(&mut rng, 3, 2);
        let imp = Implementation::new(AncillaState::Mixed(rho_a), u).unwrap();
        let rho = random_density(&mut rng, 2, 2);
        let out = apply_channel(&imp, &rho).unwrap();
        assert!(out.max_abs_diff(&(&(&us * &rho) * &us.adjoint())) < 1e-12);
    }

    #[test]
    fn swap_replaces_state() {
        let imp = Implementation::pure(basis_vector(2, 0), swap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..5 {
            let rho = random_density(&mut rng, 2, 2);
            let out = apply_channel(&imp, &rho).unwrap();
            assert!(out.max_abs_diff(&ComplexMatrix::from_real_diag(&[1.0, 0.0])) < 1e-15);
        }
    }

    #[test]
    fn channel_matches_kraus_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let da = 3;
        let u = random_unitary(&mut rng, 2 * da);
        let rho_a = random_density(&mut rng, da, 2);
        let imp = Implementation::new(AncillaState::Mixed(rho_a.clone()), u.clone()).unwrap();
        let rho_s = random_density(&mut rng, 2, 2);

        // Oracle: Kraus operators are blocks of U contracted with each
        // column of the purification of rho_A.
        let p = purify(&rho_a).unwrap();
        let mut out = ComplexMatrix::zeros(2, 2);
        for a in 0..da {
            for k in 0..p.aux_dim {
                let col: Vec<Complex64> = (0..da).map(|b| p.vector[b * p.aux_dim + k]).collect();
                let kraus = ComplexMatrix::from_fn(2, 2, |s, t| {
                    (0..da).map(|b| u[(s * da + a, t * da + b)] * col[b]).sum()
                });
                out += &(&(&kraus * &rho_s) * &kraus.adjoint());
            }
        }
        let direct = apply_channel(&imp, &rho_s).unwrap();
        assert!(direct.max_abs_diff(&out) < 1e-12);
        assert!((direct.trace().re - 1.0).abs() < 1e-10);
        assert!(hermitian_eig(&direct).unwrap().values[0] > -1e-9);
    }

    #[test]
    fn apply_channel_rejects_bad_input() {
        let imp = Implementation::pure(basis_vector(2, 0), swap()).unwrap();
        assert!(apply_channel(&imp, &ComplexMatrix::identity(3)).is_err());
        assert!(Implementation::pure(basis_vector(3, 0), swap()).is_err());
        assert!(Implementation::pure(vec![real(0.5), ZERO], swap()).is_err());
    }

    #[test]
    fn state_fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let target = random_gate(&mut rng);
        let perfect = Implementation::pure(basis_vector(2, 1), kron(&target.matrix(), &ComplexMatrix::identity(2))).unwrap();
        for _ in 0..5 {
            let psi = random_state(&mut rng, 2);
            assert!((state_fidelity(&perfect, &target, &psi).unwrap() - 1.0).abs() < 1e-12);
        }

        let idle = Implementation::pure(basis_vector(2, 0), ComplexMatrix::identity(4)).unwrap();
        let x = GateSpec::pauli_x();
        assert!(state_fidelity(&idle, &x, &basis_vector(2, 0)).unwrap() < 1e-12);
        let plus = [real(FRAC_1_SQRT_2), real(FRAC_1_SQRT_2)];
        assert!((state_fidelity(&idle, &x, &plus).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn landscape_matches_direct_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for da in [1, 2, 3] {
            let imp = Implementation::pure(random_state(&mut rng, da), random_unitary(&mut rng, 2 * da)).unwrap();
            let mixed = Implementation::new(AncillaState::Mixed(random_density(&mut rng, da, da)), random_unitary(&mut rng, 2 * da)).unwrap();
            let target = random_gate(&mut rng);
            for case in [&imp, &mixed] {
                let land = fidelity_landscape(case, &target);
                for _ in 0..10 {
                    let (z, d) = (rng.random_range(0.0..FRAC_PI_2), rng.random_range(0.0..TAU));
                    let direct = state_fidelity(case, &target, &qubit_state(z, d)).unwrap();
                    assert!((land.eval_angles(z, d) - direct * direct).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn worst_case_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let target = random_gate(&mut rng);
        let perfect = Implementation::pure(basis_vector(3, 2), kron(&target.matrix(), &ComplexMatrix::identity(3))).unwrap();
        let r = worst_case_fidelity(&perfect, &target, &FidelityOptions::default());
        assert!((r.worst_fidelity - 1.0).abs() < 1e-12);

        let swap_imp = Implementation::pure(basis_vector(2, 0), swap()).unwrap();
        let r = worst_case_fidelity(&swap_imp, &GateSpec::identity(), &FidelityOptions::default());
        assert!(r.worst_fidelity < 1e-9, "{r:?}");
        assert!((r.argmin_state.zeta - FRAC_PI_2).abs() < 1e-6);
        assert_eq!(r.grid_resolution, [64, 128]);
    }

    #[test]
    fn worst_case_is_below_every_probe() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let opts = FidelityOptions::default();
        for da in [2, 4] {
            let imp = Implementation::pure(random_state(&mut rng, da), random_unitary(&mut rng, 2 * da)).unwrap();
            let target = random_gate(&mut rng);
            let r = worst_case_fidelity(&imp, &target, &opts);
            assert!(r.certified_gap >= 0.0);
            for i in 0..opts.zeta_points {
                for j in 0..opts.delta_points {
                    let f = state_fidelity(&imp, &target, &qubit_state(opts.zeta_at(i), opts.delta_at(j))).unwrap();
                    assert!(r.worst_fidelity <= f + 1e-12);
                }
            }
            for _ in 0..200 {
                let f = state_fidelity(&imp, &target, &random_state(&mut rng, 2)).unwrap();
                assert!(r.worst_fidelity <= f + 1e-12);
            }
        }
    }

    fn z_law(da: usize) -> ConservedLaw {
        let la = ComplexMatrix::from_real_diag(&(0..da).map(|k| (da - 1) as f64 - 2.0 * k as f64).collect::<Vec<_>>());
        standard_conserved(&pauli_z(), la).unwrap()
    }

    #[test]
    fn conservation_residual_examples() {
        let law = z_law(2);
        let l = law.total_operator();
        let u = crate::linalg::unitary_exp(&l, 0.83).unwrap();
        let imp = Implementation::pure(basis_vector(2, 0), u).unwrap();
        assert!(conservation_residual(&imp, &law) <= 1e-10);

        let h = GateSpec::hadamard().matrix();
        let imp = Implementation::pure(basis_vector(2, 0), kron(&h, &ComplexMatrix::identity(2))).unwrap();
        let res = conservation_residual(&imp, &law);
        // [H (x) I, Z (x) I] = [H, Z] (x) I.
        let expected = operator_norm(&h.commutator(&pauli_z()));
        assert!((res - expected).abs() < 1e-12);
        assert!(res > 1.0);
    }

    #[test]
    fn sigma_ancilla_examples() {
        let law = z_law(3);
        assert_eq!(sigma_ancilla(&AncillaState::Pure(basis_vector(3, 1)), &law), 0.0);
        let s = FRAC_1_SQRT_2;
        // L_A = diag(2, 0, -2), c = 1: equal weights on +-2 -> sigma(L_A/c) = 2.
        let v = vec![real(s), ZERO, real(s)];
        assert!((sigma_ancilla(&AncillaState::Pure(v), &law) - 2.0).abs() < 1e-15);
        let law2 = ConservedLaw::new(2.0, 2.0, [0.0, 0.0, 1.0], ComplexMatrix::from_real_diag(&[2.0, -2.0])).unwrap();
        let v = vec![real(s), real(s)];
        assert!((sigma_ancilla(&AncillaState::Pure(v), &law2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deviation_vanishes_for_perfect_commuting_gate() {
        let law = z_law(2);
        let target = GateSpec::new(0.4, 1.1, [0.0, 0.0, 1.0]).unwrap();
        let imp = Implementation::pure(basis_vector(2, 1), kron(&target.matrix(), &ComplexMatrix::identity(2))).unwrap();
        let rep = deviation_report(&imp, &target, &law, &qubit_state(0.3, 0.2)).unwrap();
        assert!(rep.mean_square < 1e-24);
        let gap = deviation_fidelity_gap(&imp, &target, &law, &FidelityOptions::default()).unwrap();
        assert!(gap.abs() < 1e-12);
    }

    #[test]
    fn deviation_report_requires_pure_ancilla() {
        let imp = Implementation::new(AncillaState::Mixed(ComplexMatrix::identity(2).scale_real(0.5)), swap()).unwrap();
        let r = deviation_report(&imp, &GateSpec::pauli_x(), &z_law(2), &basis_vector(2, 0));
        assert!(matches!(r, Err(crate::Error::InvalidArgument(_))));
    }

    #[test]
    fn deviation_identity_holds_for_arbitrary_unitary() {
        // The mean-square expansion does not use the conservation law.
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let law = standard_conserved(&random_density(&mut rng, 2, 2), ComplexMatrix::from_real_diag(&[0.3, -1.0, 2.0])).unwrap();
        let imp = Implementation::pure(random_state(&mut rng, 3), random_unitary(&mut rng, 6)).unwrap();
        let target = random_gate(&mut rng);
        let basis = deviation_basis(&imp, &target, &law).unwrap();
        for _ in 0..10 {
            let (z, d) = (rng.random_range(0.0..FRAC_PI_2), rng.random_range(0.0..TAU));
            let rep = deviation_report(&imp, &target, &law, &basis.input_state(z, d)).unwrap();
            assert!((rep.mean_square - basis.mean_square(z)).abs() < 1e-10);
            assert!(rep.variance <= rep.mean_square + 1e-12);
        }
        for j in 0..2 {
            let f = state_fidelity(&imp, &target, &basis.xi[j]).unwrap();
            assert!((basis.amplitude_norm_sq[j][1 - j] - (1.0 - f * f)).abs() < 1e-10);
        }
    }

    #[test]
    fn not_gate_rotated_identity() {
        // [D_y, L] = 2i D_x + 4i X (x) I for any conserving U.
        let law = z_law(2);
        let u = crate::linalg::unitary_exp(&law.total_operator(), 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let imp = Implementation::pure(random_state(&mut rng, 2), u).unwrap();
        let rd = rotated_deviations(&imp, &GateSpec::pauli_x(), &law).unwrap();
        assert!(rd.identity_residuals[0] <= 1e-10 && rd.identity_residuals[1] <= 1e-10);
        let dx = deviation_operator(&imp, &GateSpec::pauli_x(), &pauli_x());
        let dy = deviation_operator(&imp, &GateSpec::pauli_x(), &pauli_y());
        let lhs = dy.commutator(&law.total_operator());
        let rhs = &dx.scale(c64(0.0, 2.0)) + &kron(&pauli_x(), &ComplexMatrix::identity(2)).scale(c64(0.0, 4.0));
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn hadamard_frame_perfect_rotation() {
        let law = z_law(2);
        let target = GateSpec::hadamard();
        let u = kron(&crate::linalg::unitary_exp(&pauli_z(), 0.7).unwrap(), &ComplexMatrix::identity(2));
        let imp = Implementation::pure(basis_vector(2, 0), u).unwrap();
        let rd = rotated_deviations(&imp, &target, &law).unwrap();
        assert!(rd.identity_residuals.iter().all(|&r| r <= 1e-9));
    }

    #[test]
    fn rotated_deviations_reject_aligned_axes() {
        let imp = Implementation::pure(basis_vector(2, 0), ComplexMatrix::identity(4)).unwrap();
        assert!(rotated_deviations(&imp, &GateSpec::pauli_z(), &z_law(2)).is_err());
    }

    #[test]
    fn purify_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let a = random_state(&mut rng, 3);
        let p = purify(&ComplexMatrix::outer(&a, &a)).unwrap();
        assert_eq!(p.aux_dim, 1);
        assert!((inner(&a, &p.vector).norm() - 1.0).abs() < 1e-12);

        let p = purify(&ComplexMatrix::identity(2).scale_real(0.5)).unwrap();
        assert_eq!(p.aux_dim, 2);
        for x in &p.vector {
            let m = x.norm();
            assert!(m < 1e-15 || (m - FRAC_1_SQRT_2).abs() < 1e-15);
        }
        let back = partial_trace_system(&ComplexMatrix::outer(&p.vector, &p.vector), 2, 2).unwrap();
        // Tracing out the ancilla leaves the auxiliary maximally mixed too.
        assert!(back.max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5)) < 1e-15);

        let rho = random_density(&mut rng, 4, 3);
        let p = purify(&rho).unwrap();
        assert_eq!(p.aux_dim, 3);
        let back = partial_trace_ancilla(&ComplexMatrix::outer(&p.vector, &p.vector), 4, 3).unwrap();
        assert!(back.max_abs_diff(&rho) < 1e-10);
    }

    #[test]
    fn purify_rejects_non_positive() {
        let m = ComplexMatrix::from_real_diag(&[1.5, -0.5]);
        assert!(purify(&m).is_err());
    }

    #[test]
    fn mixed_equivalence_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pure = Implementation::pure(random_state(&mut rng, 2), random_unitary(&mut rng, 4)).unwrap();
        assert_eq!(mixed_channel_equivalence(&pure).unwrap(), 0.0);

        let law = z_law(2);
        let u = crate::linalg::unitary_exp(&law.total_operator(), 1.3).unwrap();
        let mixed = Implementation::new(AncillaState::Mixed(ComplexMatrix::identity(2).scale_real(0.5)), u).unwrap();
        assert!(mixed_channel_equivalence(&mixed).unwrap() <= 1e-10);
    }

    #[test]
    fn tomography_inputs_are_states() {
        for rho in tomography_inputs() {
            assert!((rho.trace().re - 1.0).abs() < 1e-15);
            assert!(rho.is_hermitian(0.0));
        }
        let _ = PI;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn channel_output_is_density(seed in any::<u64>(), da in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let imp = Implementation::new(AncillaState::Mixed(random_density(&mut rng, da, da)), random_unitary(&mut rng, 2 * da)).unwrap();
            let out = apply_channel(&imp, &random_density(&mut rng, 2, 1)).unwrap();
            prop_assert!((out.trace().re - 1.0).abs() <= 1e-10);
            prop_assert!(out.is_hermitian(1e-12));
            prop_assert!(hermitian_eig(&out).unwrap().values[0] >= -1e-9);
        }

        #[test]
        fn variance_additivity_on_product_states(seed in any::<u64>(), da in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let la = random_density(&mut rng, da, da).scale_real(3.0);
            let law = standard_conserved(&random_density(&mut rng, 2, 2), la).unwrap();
            let psi = random_state(&mut rng, 2);
            let a = random_state(&mut rng, da);
            let state = kron_vec(&psi, &a);
            let var = |m: &ComplexMatrix, v: &[Complex64]| {
                let mean = m.expectation(v).re;
                (m * m).expectation(v).re - mean * mean
            };
            let total = var(&law.total_operator(), &state);
            let parts = var(&law.qubit_operator(), &psi) + var(&law.ancilla_operator, &a);
            prop_assert!((total - parts).abs() <= 1e-10);
            prop_assert!(var(&law.qubit_operator(), &psi).sqrt() <= law.c + 1e-12);
        }
    }
}
