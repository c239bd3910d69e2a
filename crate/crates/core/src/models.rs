//! Generators of implementations that respect a conservation law.
//!
//! Every unitary commuting with `L` is block diagonal in the eigenspaces of
//! `L`. This module exposes that block structure, samples Haar-random
//! elements of it, builds two physical models (an atom coupled to a field
//! mode, and a qubit coupled to a spin under full rotational symmetry) and
//! searches the feasible set for high-fidelity implementations.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{decompose_gate, standard_conserved, ConservedLaw, GateSpec};
use crate::channel::{worst_case_fidelity_on, AncillaState, FidelityOptions, FidelityResult, Implementation, SphereGrid};
use crate::error::{invalid, Error, Result};
use crate::linalg::{
    c64, hermitian_eig, kron, normalize, pauli_dot, pauli_x, pauli_y, pauli_z, qr_positive, real, unitary_exp,
    ComplexMatrix, ZERO,
};

/// Relative gap below which eigenvalues of `L` share a block.
const CLUSTER_TOL: f64 = 1e-9;
/// Largest ancilla weight tolerated near the Fock cutoff.
const TRUNCATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EigenCluster {
    pub value: f64,
    /// Orthonormal columns spanning the eigenspace.
    pub basis: ComplexMatrix,
}

impl EigenCluster {
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }
}

/// Eigenspace decomposition of a conserved operator.
#[derive(Debug, Clone)]
pub struct CommutantStructure {
    pub clusters: Vec<EigenCluster>,
    pub total_dim: usize,
}

impl CommutantStructure {
    pub fn cluster_dims(&self) -> Vec<usize> {
        self.clusters.iter().map(EigenCluster::dim).collect()
    }

    /// Number of real parameters of a Hermitian generator on every block.
    pub fn parameter_count(&self) -> usize {
        self.clusters.iter().map(|c| c.dim() * c.dim()).sum()
    }

    /// `sum_k B_k W_k B_k^dag` for one block `W_k` per cluster.
    pub fn assemble(&self, blocks: &[ComplexMatrix]) -> ComplexMatrix {
        assert_eq!(blocks.len(), self.clusters.len(), "one block per cluster");
        let mut out = ComplexMatrix::zeros(self.total_dim, self.total_dim);
        for (cluster, w) in self.clusters.iter().zip(blocks) {
            assert_eq!(w.rows(), cluster.dim());
            let b = &cluster.basis;
            out += &(&(b * w) * &b.adjoint());
        }
        out
    }

    /// Block unitary `exp(i H_k)` per cluster, with each Hermitian `H_k` read
    /// from `params` by [`hermitian_from_params`].
    pub fn unitary_from_params(&self, params: &[f64]) -> ComplexMatrix {
        assert_eq!(params.len(), self.parameter_count());
        let mut offset = 0;
        let blocks: Vec<ComplexMatrix> = self
            .clusters
            .iter()
            .map(|c| {
                let d = c.dim();
                let h = hermitian_from_params(d, &params[offset..offset + d * d]);
                offset += d * d;
                unitary_exp(&h, 1.0).expect("Hermitian by construction")
            })
            .collect();
        self.assemble(&blocks)
    }
}

/// Hermitian `d x d` matrix from `d^2` reals: the diagonal first, then real
/// and imaginary parts of the strict upper triangle, row by row.
pub fn hermitian_from_params(d: usize, params: &[f64]) -> ComplexMatrix {
    assert_eq!(params.len(), d * d);
    let mut h = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        h[(i, i)] = real(params[i]);
    }
    let mut k = d;
    for i in 0..d {
        for j in i + 1..d {
            let z = c64(params[k], params[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

pub fn commutant_blocks(law: &ConservedLaw) -> CommutantStructure {
    commutant_of(&law.total_operator()).expect("conserved operator is Hermitian")
}

/// Clusters the spectrum of any Hermitian operator.
pub fn commutant_of(l: &ComplexMatrix) -> Result<CommutantStructure> {
    let eig = hermitian_eig(l)?;
    let n = eig.values.len();
    let range = eig.values[n - 1] - eig.values[0];
    let tol = CLUSTER_TOL * range;
    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    for k in 1..n {
        if eig.values[k] - eig.values[k - 1] <= tol {
            groups.last_mut().unwrap().push(k);
        } else {
            groups.push(vec![k]);
        }
    }
    let clusters = groups
        .into_iter()
        .map(|idx| {
            let value = idx.iter().map(|&k| eig.values[k]).sum::<f64>() / idx.len() as f64;
            let cols: Vec<Vec<Complex64>> = idx.iter().map(|&k| eig.vectors.column(k)).collect();
            EigenCluster {
                value,
                basis: ComplexMatrix::from_columns(&cols),
            }
        })
        .collect();
    Ok(CommutantStructure { clusters, total_dim: n })
}

/// `n x n` matrix of independent standard complex Gaussians.
pub fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn haar_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    loop {
        if let Ok((q, _)) = qr_positive(&ginibre(rng, n, n)) {
            return q;
        }
    }
}

/// Independent Haar unitary on every block, assembled in the cluster basis.
pub fn sample_constrained_unitary(structure: &CommutantStructure, seed: u64) -> ComplexMatrix {
    sample_constrained_unitary_with(structure, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_constrained_unitary_with(structure: &CommutantStructure, rng: &mut impl Rng) -> ComplexMatrix {
    let blocks: Vec<ComplexMatrix> = structure.clusters.iter().map(|c| haar_unitary(rng, c.dim())).collect();
    structure.assemble(&blocks)
}

/// Uniformly random pure state.
pub fn random_pure_state(rng: &mut impl Rng, d: usize) -> Vec<Complex64> {
    loop {
        let g = ginibre(rng, d, 1);
        if let Ok(v) = normalize(g.as_slice()) {
            return v;
        }
    }
}

/// Random density matrix of the given rank (induced measure).
pub fn random_density(rng: &mut impl Rng, d: usize, rank: usize) -> ComplexMatrix {
    let g = ginibre(rng, d, rank);
    let rho = &g * &g.adjoint();
    let tr = rho.trace().re;
    rho.scale_real(1.0 / tr).hermitian_part()
}

pub fn random_unit_vector(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = crate::linalg::norm3(v);
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Haar-random target gate.
pub fn random_gate(rng: &mut impl Rng) -> GateSpec {
    decompose_gate(&haar_unitary(rng, 2)).expect("Haar sample is unitary")
}

/// Random law with `L_S` in a random direction and
/// `L_A = c V diag(2 m_k) V^dag` for random integers `|m_k| <= 2`, so the
/// spectrum of `L` has the degeneracies that let qubit and ancilla
/// exchange quanta.
pub fn random_law(rng: &mut impl Rng, ancilla_dim: usize) -> ConservedLaw {
    let c = rng.random_range(0.5..2.0);
    let b = rng.random_range(-1.0..1.0);
    let direction = random_unit_vector(rng);
    let diag: Vec<f64> = (0..ancilla_dim).map(|_| c * 2.0 * rng.random_range(-2i32..=2) as f64).collect();
    let v = haar_unitary(rng, ancilla_dim);
    let la = (&(&v * &ComplexMatrix::from_real_diag(&diag)) * &v.adjoint()).hermitian_part();
    ConservedLaw::new(b, c, direction, la).expect("valid by construction")
}

/// Haar-random block unitary for `law` with a random pure ancilla.
pub fn random_constrained_implementation(rng: &mut impl Rng, law: &ConservedLaw) -> Implementation {
    let u = sample_constrained_unitary_with(&commutant_blocks(law), rng);
    Implementation::pure(random_pure_state(rng, law.ancilla_dim()), u).expect("valid by construction")
}

/// `diag(d - 1, d - 3, ..., 1 - d)`, twice the `z` spin component of a
/// `d`-level ancilla.
pub fn ladder_operator(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&(0..d).map(|k| (d - 1) as f64 - 2.0 * k as f64).collect::<Vec<_>>())
}

/// `diag(0, 2, 4, ...)`, twice the photon number.
pub fn number_operator_doubled(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_real_diag(&(0..d).map(|k| 2.0 * k as f64).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedLaw {
    /// `L_S = Z`, `L_A = diag(d - 1, ..., 1 - d)`
    Z,
    /// `L_S = X`, `L_A = diag(d - 1, ..., 1 - d)`
    X,
    /// `L_S = Z`, `L_A = 2 a^dag a`
    Jc,
}

impl NamedLaw {
    pub fn build(self, ancilla_dim: usize) -> ConservedLaw {
        let (ls, la) = match self {
            NamedLaw::Z => (pauli_z(), ladder_operator(ancilla_dim)),
            NamedLaw::X => (pauli_x(), ladder_operator(ancilla_dim)),
            NamedLaw::Jc => (pauli_z(), number_operator_doubled(ancilla_dim)),
        };
        standard_conserved(&ls, la).expect("Pauli operators are non-degenerate")
    }
}

impl std::str::FromStr for NamedLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "z" => Ok(NamedLaw::Z),
            "x" => Ok(NamedLaw::X),
            "jc" => Ok(NamedLaw::Jc),
            other => invalid(format!("unknown law '{other}', expected z, x or jc")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JcParams {
    /// Detuning `Delta`.
    pub detuning: f64,
    /// Coupling `g`.
    pub coupling: f64,
    pub time: f64,
    /// Highest Fock level kept.
    pub n_max: usize,
}

impl JcParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 1 {
            return invalid("n_max must be at least 1");
        }
        if !(self.coupling >= 0.0) || !self.coupling.is_finite() {
            return invalid("coupling must be a finite non-negative number");
        }
        if !self.detuning.is_finite() || !self.time.is_finite() {
            return invalid("detuning and time must be finite");
        }
        Ok(())
    }

    pub fn ancilla_dim(&self) -> usize {
        self.n_max + 1
    }
}

/// Atom-field model with `H = Delta I (x) a^dag a + i g (|0><1| (x) a - |1><0| (x) a^dag)`.
#[derive(Debug, Clone)]
pub struct JcModel {
    pub params: JcParams,
    pub unitary: ComplexMatrix,
    pub law: ConservedLaw,
}

impl JcModel {
    /// Implementation with the given field state. States with weight on the
    /// two highest kept levels are rejected, since the truncated dynamics
    /// there is not faithful.
    pub fn implementation(&self, field: Vec<Complex64>) -> Result<Implementation> {
        let d = self.params.ancilla_dim();
        if field.len() != d {
            return invalid(format!("field state must have dimension {d}, got {}", field.len()));
        }
        let start = d.saturating_sub(2);
        let top: f64 = field[start..].iter().map(|z| z.norm_sqr()).sum();
        if top > TRUNCATION_TOL {
            return Err(Error::Truncation(format!(
                "field weight {top:e} within two levels of n_max = {}; increase n_max",
                self.params.n_max
            )));
        }
        Implementation::pure(field, self.unitary.clone())
    }
}

/// Dense truncated Hamiltonian, for cross-checking.
pub fn jc_hamiltonian(params: &JcParams) -> ComplexMatrix {
    let d = params.ancilla_dim();
    let mut h = ComplexMatrix::zeros(2 * d, 2 * d);
    for s in 0..2 {
        for n in 0..d {
            h[(s * d + n, s * d + n)] = real(params.detuning * n as f64);
        }
    }
    // |0><1| (x) a couples |1, n + 1> to |0, n>.
    for n in 0..d - 1 {
        let amp = params.coupling * ((n + 1) as f64).sqrt();
        h[(n, d + n + 1)] = c64(0.0, amp);
        h[(d + n + 1, n)] = c64(0.0, -amp);
    }
    h
}

/// `exp(-i t H)` built block by block on the pairs `(|0, n>, |1, n + 1>)`,
/// with `|1, 0>` and `|0, n_max>` as phase-only singletons.
pub fn build_jc(params: JcParams) -> Result<JcModel> {
    params.validate()?;
    let d = params.ancilla_dim();
    let JcParams {
        detuning: delta,
        coupling: g,
        time: t,
        n_max,
    } = params;
    let mut u = ComplexMatrix::zeros(2 * d, 2 * d);
    u[(d, d)] = real(1.0);
    u[(n_max, n_max)] = Complex64::from_polar(1.0, -t * delta * n_max as f64);
    for n in 0..n_max {
        // H_block = E0 I + h.sigma with h = (0, -g sqrt(n + 1), -Delta / 2).
        let e0 = delta * (n as f64 + 0.5);
        let h = [0.0, -g * ((n + 1) as f64).sqrt(), -0.5 * delta];
        let hn = crate::linalg::norm3(h);
        let (sin, cos) = (t * hn).sin_cos();
        let phase = Complex64::from_polar(1.0, -t * e0);
        let axis = if hn > 0.0 { [h[0] / hn, h[1] / hn, h[2] / hn] } else { [0.0; 3] };
        let block = &ComplexMatrix::identity(2).scale_real(cos) - &pauli_dot(axis).scale(c64(0.0, sin));
        let idx = [n, d + n + 1];
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                u[(i, j)] = phase * block[(r, c)];
            }
        }
    }
    let law = standard_conserved(&pauli_z(), number_operator_doubled(d))?;
    Ok(JcModel { params, unitary: u, law })
}

/// Coherent field state truncated at `n_max`, renormalized.
pub fn coherent_state(alpha: Complex64, n_max: usize) -> Result<Vec<Complex64>> {
    let r = alpha.norm();
    let arg = alpha.arg();
    let mean = r * r;
    if r == 0.0 {
        let mut v = vec![ZERO; n_max + 1];
        v[0] = real(1.0);
        return Ok(v);
    }
    let log_r = r.ln();
    let mut log_fact = 0.0;
    let mut amps = Vec::with_capacity(n_max + 1);
    let mut tail = 0.0;
    let mut n = 0usize;
    loop {
        if n > 0 {
            log_fact += (n as f64).ln();
        }
        let log_p = -mean + 2.0 * n as f64 * log_r - log_fact;
        if n <= n_max {
            amps.push(Complex64::from_polar((0.5 * log_p).exp(), n as f64 * arg));
        } else {
            let p = log_p.exp();
            tail += p;
            if n as f64 > mean && p < 1e-30 {
                break;
            }
        }
        n += 1;
    }
    if tail > TRUNCATION_TOL {
        return Err(Error::Truncation(format!(
            "coherent state with |alpha| = {r} has mass {tail:e} beyond n_max = {n_max}; increase n_max"
        )));
    }
    normalize(&amps)
}

/// Spin matrices `(Jx, Jy, Jz)` for spin `N/2`, basis ordered `m = j, ..., -j`.
pub fn spin_operators(big_n: usize) -> [ComplexMatrix; 3] {
    assert!(big_n >= 1, "spin dimension must be at least 2");
    let d = big_n + 1;
    let j = big_n as f64 / 2.0;
    let m = |k: usize| j - k as f64;
    let mut raise = ComplexMatrix::zeros(d, d);
    for k in 1..d {
        raise[(k - 1, k)] = real((j * (j + 1.0) - m(k) * (m(k) + 1.0)).sqrt());
    }
    let lower = raise.adjoint();
    let jx = (&raise + &lower).scale_real(0.5);
    let jy = (&raise - &lower).scale(c64(0.0, -0.5));
    let jz = ComplexMatrix::from_real_diag(&(0..d).map(m).collect::<Vec<_>>());
    [jx, jy, jz]
}

/// `l.J`
pub fn spin_component(spin: &[ComplexMatrix; 3], l: [f64; 3]) -> ComplexMatrix {
    let mut out = spin[0].scale_real(l[0]);
    out += &spin[1].scale_real(l[1]);
    out += &spin[2].scale_real(l[2]);
    out
}

/// Total angular momentum `sigma_k / 2 (x) I + I (x) J_k`.
pub fn total_angular_momentum(big_n: usize) -> [ComplexMatrix; 3] {
    let spin = spin_operators(big_n);
    let paulis = [pauli_x(), pauli_y(), pauli_z()];
    let id_a = ComplexMatrix::identity(big_n + 1);
    std::array::from_fn(|k| &kron(&paulis[k].scale_real(0.5), &id_a) + &kron(&ComplexMatrix::identity(2), &spin[k]))
}

/// `L_S = l.sigma / 2`, `L_A = l.J`: `b = c = 1/2`.
pub fn spin_law(big_n: usize, direction: [f64; 3]) -> Result<ConservedLaw> {
    let la = spin_component(&spin_operators(big_n), direction);
    ConservedLaw::new(0.5, 0.5, direction, la.hermitian_part())
}

/// Qubit coupled to a spin-`N/2` ancilla by a rotationally invariant unitary.
#[derive(Debug, Clone)]
pub struct SpinModel {
    pub big_n: usize,
    /// Projectors onto total spin `N/2 + 1/2` and `N/2 - 1/2`.
    pub projectors: [ComplexMatrix; 2],
}

impl SpinModel {
    pub fn new(big_n: usize) -> Self {
        assert!(big_n >= 1, "spin dimension must be at least 2");
        let spin = spin_operators(big_n);
        let d = big_n + 1;
        let paulis = [pauli_x(), pauli_y(), pauli_z()];
        let mut coupling = ComplexMatrix::zeros(2 * d, 2 * d);
        for k in 0..3 {
            coupling += &kron(&paulis[k], &spin[k]);
        }
        // Eigenvalues are N/2 and -(N/2 + 1); the midpoint -1/2 separates them.
        let eig = hermitian_eig(&coupling).expect("Hermitian by construction");
        let plus = eig.apply_fn(|x| real(if x > -0.5 { 1.0 } else { 0.0 }));
        let minus = &ComplexMatrix::identity(2 * d) - &plus;
        Self {
            big_n,
            projectors: [plus, minus],
        }
    }

    pub fn ancilla_dim(&self) -> usize {
        self.big_n + 1
    }

    /// `e^{i phi_plus} P_plus + e^{i phi_minus} P_minus`
    pub fn unitary(&self, phase_plus: f64, phase_minus: f64) -> ComplexMatrix {
        &self.projectors[0].scale(Complex64::from_polar(1.0, phase_plus))
            + &self.projectors[1].scale(Complex64::from_polar(1.0, phase_minus))
    }

    pub fn implementation(&self, phase_plus: f64, phase_minus: f64, ancilla: Vec<Complex64>) -> Result<Implementation> {
        if ancilla.len() != self.ancilla_dim() {
            return invalid(format!("spin ancilla must have dimension {}", self.ancilla_dim()));
        }
        Implementation::pure(ancilla, self.unitary(phase_plus, phase_minus))
    }
}

pub fn build_spin_invariant(big_n: usize) -> SpinModel {
    SpinModel::new(big_n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Objective evaluations per restart.
    pub budget: usize,
    pub initial_step: f64,
    pub shrink: f64,
    pub min_step: f64,
    /// Grid used inside the search loop.
    pub search_fidelity: FidelityOptions,
    /// Grid used to score the returned implementation.
    pub final_fidelity: FidelityOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            budget: 20_000,
            initial_step: 0.3,
            shrink: 0.5,
            min_step: 1e-7,
            search_fidelity: FidelityOptions::coarse(),
            final_fidelity: FidelityOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub implementation: Implementation,
    pub fidelity: FidelityResult,
    pub best_restart: usize,
    /// Objective evaluations summed over restarts.
    pub evaluations: usize,
    /// Final fidelity of every restart, in restart order.
    pub restart_fidelities: Vec<f64>,
}

/// Coordinate descent with shrinking steps. Returns `(x, f(x), evaluations)`.
pub fn coordinate_descent(
    mut f: impl FnMut(&[f64]) -> f64,
    mut x: Vec<f64>,
    initial_step: f64,
    shrink: f64,
    min_step: f64,
    budget: usize,
) -> (Vec<f64>, f64, usize) {
    let mut best = f(&x);
    let mut evals = 1;
    let mut step = initial_step;
    'outer: while step >= min_step {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                if evals >= budget {
                    break 'outer;
                }
                let old = x[i];
                x[i] = old + dir * step;
                let val = f(&x);
                evals += 1;
                if val < best {
                    best = val;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        if !improved {
            step *= shrink;
        }
    }
    (x, best, evals)
}

/// Normalized complex vector from `2 d` unconstrained reals.
pub fn state_from_params(params: &[f64]) -> Vec<Complex64> {
    let v: Vec<Complex64> = params.chunks(2).map(|p| c64(p[0], p[1])).collect();
    normalize(&v).unwrap_or_else(|_| {
        let mut e = vec![ZERO; v.len()];
        e[0] = real(1.0);
        e
    })
}

/// Multi-start search over a parameterized family. `build` maps a parameter
/// vector to an implementation and `init` draws a starting point.
pub fn optimize_family<B, S>(target: &GateSpec, options: &OptimizeOptions, build: B, init: S) -> OptimizeOutcome
where
    B: Fn(&[f64]) -> Implementation + Sync,
    S: Fn(&mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    assert!(options.restarts >= 1, "at least one restart");
    let search_grid = SphereGrid::new(options.search_fidelity);
    let final_grid = SphereGrid::new(options.final_fidelity);
    let runs: Vec<(Implementation, FidelityResult, usize)> = (0..options.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(r as u64);
            let x0 = init(&mut rng);
            let objective = |x: &[f64]| -worst_case_fidelity_on(&search_grid, &build(x), target).worst_fidelity;
            let (x, _, evals) = coordinate_descent(
                objective,
                x0,
                options.initial_step,
                options.shrink,
                options.min_step,
                options.budget,
            );
            let imp = build(&x);
            let fid = worst_case_fidelity_on(&final_grid, &imp, target);
            (imp, fid, evals)
        })
        .collect();
    let mut best = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.1.worst_fidelity > runs[best].1.worst_fidelity {
            best = k;
        }
    }
    let evaluations = runs.iter().map(|r| r.2).sum();
    let restart_fidelities = runs.iter().map(|r| r.1.worst_fidelity).collect();
    let (implementation, fidelity, _) = runs.into_iter().nth(best).unwrap();
    OptimizeOutcome {
        implementation,
        fidelity,
        best_restart: best,
        evaluations,
        restart_fidelities,
    }
}

/// Searches block unitaries `exp(i H_k)` and pure ancilla states for the
/// highest worst-case fidelity with `target`.
pub fn optimize_implementation(law: &ConservedLaw, target: &GateSpec, options: &OptimizeOptions) -> OptimizeOutcome {
    let structure = commutant_blocks(law);
    let np = structure.parameter_count();
    let da = law.ancilla_dim();
    optimize_family(
        target,
        options,
        |x| {
            let u = structure.unitary_from_params(&x[..np]);
            Implementation::pure(state_from_params(&x[np..]), u).expect("unitary by construction")
        },
        |rng| {
            let mut x: Vec<f64> = (0..np).map(|_| rng.random_range(-1.0..1.0) * std::f64::consts::PI).collect();
            x.extend((0..2 * da).map(|_| rng.sample::<f64, _>(StandardNormal)));
            x
        },
    )
}

/// Searches the phase difference and the ancilla state of the spin model.
pub fn optimize_spin(model: &SpinModel, target: &GateSpec, options: &OptimizeOptions) -> OptimizeOutcome {
    let da = model.ancilla_dim();
    optimize_family(
        target,
        options,
        |x| model.implementation(x[0], 0.0, state_from_params(&x[1..])).expect("valid by construction"),
        |rng| {
            let mut x = vec![rng.random_range(0.0..TAU)];
            x.extend((0..2 * da).map(|_| rng.sample::<f64, _>(StandardNormal)));
            x
        },
    )
}

/// `sigma(L_A / c)` of the ancilla of `imp`.
pub fn implementation_sigma(imp: &Implementation, law: &ConservedLaw) -> f64 {
    crate::channel::sigma_ancilla(imp.ancilla_state(), law)
}

/// Pure ancilla of an implementation, if any.
pub fn pure_ancilla(imp: &Implementation) -> Option<&[Complex64]> {
    match imp.ancilla_state() {
        AncillaState::Pure(v) => Some(v),
        AncillaState::Mixed(_) => None,
    }
}
