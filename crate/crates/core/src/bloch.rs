//! Bloch-sphere data for single-qubit gates and qubit conserved quantities.
//!
//! A gate is stored as `e^{i phi} (cos(theta/2) I + i sin(theta/2) u.sigma)`
//! and a conserved quantity as `(b - c) I + c l.sigma`. The relative angle
//! between `u` and `l` drives every bound in [`crate::bounds`].

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    cross, dot3, kron, norm3, pauli_coefficients, pauli_dot, ComplexMatrix, HERMITIAN_TOL,
    UNITARY_TOL,
};

/// Axis used when `theta = 0` and the rotation axis is undefined.
pub const IDENTITY_AXIS: [f64; 3] = [0.0, 0.0, 1.0];

/// Below this `|cos(theta/2)|` a decomposed gate is treated as a half-turn.
const HALF_TURN_TOL: f64 = 1e-12;
const ZERO_ROTATION_TOL: f64 = 1e-15;
const MIN_SPECTRAL_GAP: f64 = 1e-10;
const MIN_SIN_PSI: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    /// Global phase, in `[0, 2 pi)`.
    pub phi: f64,
    /// Rotation angle, in `[0, pi]`.
    pub theta: f64,
    /// Unit rotation axis.
    pub axis: [f64; 3],
}

impl GateSpec {
    /// Normalizes `axis`; rejects angles outside their ranges.
    pub fn new(phi: f64, theta: f64, axis: [f64; 3]) -> Result<Self> {
        if !phi.is_finite() || !theta.is_finite() {
            return invalid("gate angles must be finite");
        }
        if !(0.0..=PI).contains(&theta) {
            return invalid(format!("theta = {theta} is outside [0, pi]"));
        }
        let axis = if theta == 0.0 {
            IDENTITY_AXIS
        } else {
            let n = norm3(axis);
            if !(n > 0.0) || !n.is_finite() {
                return invalid("gate axis must be a non-zero finite vector");
            }
            [axis[0] / n, axis[1] / n, axis[2] / n]
        };
        Ok(Self {
            phi: wrap_angle(phi),
            theta,
            axis,
        })
    }

    pub fn identity() -> Self {
        Self {
            phi: 0.0,
            theta: 0.0,
            axis: IDENTITY_AXIS,
        }
    }

    pub fn pauli_x() -> Self {
        Self::half_turn([1.0, 0.0, 0.0])
    }

    pub fn pauli_y() -> Self {
        Self::half_turn([0.0, 1.0, 0.0])
    }

    pub fn pauli_z() -> Self {
        Self::half_turn([0.0, 0.0, 1.0])
    }

    pub fn hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::half_turn([s, 0.0, s])
    }

    /// Self-adjoint gate `a.sigma` for a unit `a` in canonical sign.
    fn half_turn(axis: [f64; 3]) -> Self {
        Self {
            phi: 1.5 * PI,
            theta: PI,
            axis,
        }
    }

    pub fn matrix(&self) -> ComplexMatrix {
        gate_from_spec(self)
    }
}

/// `e^{i phi}(cos(theta/2) I + i sin(theta/2) u.sigma)`
pub fn gate_from_spec(spec: &GateSpec) -> ComplexMatrix {
    let (s, c) = (0.5 * spec.theta).sin_cos();
    let rot = &ComplexMatrix::identity(2).scale_real(c) + &pauli_dot(spec.axis).scale(Complex64::new(0.0, s));
    rot.scale(Complex64::from_polar(1.0, spec.phi))
}

/// Recovers `(phi, theta, u)` from a 2x2 unitary.
///
/// `det U = e^{2 i phi}` fixes `phi` up to `pi`; the branch is the one giving
/// `cos(theta/2) >= 0`. At `theta = pi` both branches are valid, and the
/// representative whose axis has a positive first non-zero component is
/// returned.
pub fn decompose_gate(u2: &ComplexMatrix) -> Result<GateSpec> {
    if u2.rows() != 2 || u2.cols() != 2 {
        return invalid(format!("expected a 2x2 gate, got {}x{}", u2.rows(), u2.cols()));
    }
    let err = u2.unitarity_error();
    if err > UNITARY_TOL {
        return invalid(format!("gate is not unitary (max |U^dag U - I| = {err:e})"));
    }
    let det = u2[(0, 0)] * u2[(1, 1)] - u2[(0, 1)] * u2[(1, 0)];
    let half_arg = 0.5 * det.arg();
    let cos_half_for = |phi: f64| {
        let v_trace = u2.trace() * Complex64::from_polar(1.0, -phi);
        0.5 * v_trace.re
    };
    let mut phi = half_arg;
    if cos_half_for(phi) < cos_half_for(phi + PI) {
        phi += PI;
    }
    let v = u2.scale(Complex64::from_polar(1.0, -phi));
    // (V - V^dag) / 2i = sin(theta/2) u.sigma
    let skew = (&v - &v.adjoint()).scale(Complex64::new(0.0, -0.5));
    let (_, n) = pauli_coefficients(&skew);
    let cos_half = 0.5 * v.trace().re;
    let sin_half = norm3(n);

    if sin_half <= ZERO_ROTATION_TOL {
        return Ok(GateSpec {
            phi: wrap_angle(phi),
            theta: 0.0,
            axis: IDENTITY_AXIS,
        });
    }
    let mut axis = [n[0] / sin_half, n[1] / sin_half, n[2] / sin_half];
    let mut theta = 2.0 * sin_half.atan2(cos_half.max(0.0));
    if cos_half.abs() <= HALF_TURN_TOL {
        theta = PI;
        if first_nonzero_is_negative(axis) {
            axis = [-axis[0], -axis[1], -axis[2]];
            phi += PI;
        }
    }
    Ok(GateSpec {
        phi: wrap_angle(phi),
        theta: theta.min(PI),
        axis,
    })
}

fn first_nonzero_is_negative(a: [f64; 3]) -> bool {
    a.iter()
        .find(|x| x.abs() > HALF_TURN_TOL)
        .is_some_and(|&x| x < 0.0)
}

fn wrap_angle(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Additive conserved quantity `L = L_S (x) I + I (x) L_A` with the qubit part
/// in standard form `(b - c) I + c l.sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedLaw {
    /// Largest eigenvalue of `L_S`.
    pub b: f64,
    /// Half the spectral gap of `L_S`, its largest standard deviation.
    pub c: f64,
    pub direction: [f64; 3],
    pub ancilla_operator: ComplexMatrix,
}

impl ConservedLaw {
    pub fn new(b: f64, c: f64, direction: [f64; 3], ancilla_operator: ComplexMatrix) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() || !b.is_finite() {
            return invalid(format!("conservation law needs finite b and c > 0 (b = {b}, c = {c})"));
        }
        let n = norm3(direction);
        if !(n > 0.0) || !n.is_finite() {
            return invalid("conservation direction must be a non-zero finite vector");
        }
        if !ancilla_operator.is_hermitian(HERMITIAN_TOL) {
            return invalid("ancilla conserved operator must be Hermitian");
        }
        Ok(Self {
            b,
            c,
            direction: [direction[0] / n, direction[1] / n, direction[2] / n],
            ancilla_operator: ancilla_operator.hermitian_part(),
        })
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_operator.rows()
    }

    /// `(b - c) I + c l.sigma`
    pub fn qubit_operator(&self) -> ComplexMatrix {
        &ComplexMatrix::identity(2).scale_real(self.b - self.c) + &pauli_dot(self.direction).scale_real(self.c)
    }

    /// `L_S (x) I_A + I_S (x) L_A`
    pub fn total_operator(&self) -> ComplexMatrix {
        let da = self.ancilla_dim();
        &kron(&self.qubit_operator(), &ComplexMatrix::identity(da))
            + &kron(&ComplexMatrix::identity(2), &self.ancilla_operator)
    }

    /// Same law with a different ancilla operator.
    pub fn with_ancilla_operator(&self, ancilla_operator: ComplexMatrix) -> Result<Self> {
        Self::new(self.b, self.c, self.direction, ancilla_operator)
    }
}

/// Puts a Hermitian qubit operator into standard form.
pub fn standard_conserved(l_s: &ComplexMatrix, ancilla_operator: ComplexMatrix) -> Result<ConservedLaw> {
    if l_s.rows() != 2 || l_s.cols() != 2 {
        return invalid(format!("qubit conserved operator must be 2x2, got {}x{}", l_s.rows(), l_s.cols()));
    }
    if !l_s.is_hermitian(HERMITIAN_TOL) {
        return invalid("qubit conserved operator must be Hermitian");
    }
    let (mean, a) = pauli_coefficients(&l_s.hermitian_part());
    let half_gap = norm3(a);
    if 2.0 * half_gap <= MIN_SPECTRAL_GAP {
        return Err(Error::DegenerateLaw);
    }
    ConservedLaw::new(
        mean + half_gap,
        half_gap,
        [a[0] / half_gap, a[1] / half_gap, a[2] / half_gap],
        ancilla_operator,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    /// Angle between the gate axis and the conservation direction.
    pub psi: f64,
    /// Angle between `l` and its image under the gate.
    pub two_gamma: f64,
    /// `sin^2(theta/2) sin^2(psi)`
    pub s: f64,
}

pub fn relative_angle(spec: &GateSpec, law: &ConservedLaw) -> GeometryReport {
    let cos_psi = dot3(law.direction, spec.axis).clamp(-1.0, 1.0);
    let psi = cos_psi.acos();
    GeometryReport {
        psi,
        two_gamma: gamma_from(spec.theta, psi),
        s: rotation_overlap(spec.theta, psi),
    }
}

/// `s = sin^2(theta/2) sin^2(psi)`
pub fn rotation_overlap(theta: f64, psi: f64) -> f64 {
    let sh = (0.5 * theta).sin();
    let sp = psi.sin();
    (sh * sh * sp * sp).clamp(0.0, 1.0)
}

/// Angle `2 gamma` between `l` and the rotated `l'`.
///
/// Rotating a unit vector by `theta` about an axis at angle `psi` moves it
/// through an angle with cosine `1 - 2 s`; this picks the branch in `[0, pi]`,
/// which reduces to `2 psi` for `theta = pi`, `psi <= pi/2`.
pub fn gamma_from(theta: f64, psi: f64) -> f64 {
    let s = rotation_overlap(theta, psi);
    (1.0 - 2.0 * s).clamp(-1.0, 1.0).acos()
}

/// Pauli operators in the frame where the conservation direction is the
/// third axis and the gate axis lies in the 1-3 plane.
#[derive(Debug, Clone)]
pub struct RotatedFrame {
    pub l1: ComplexMatrix,
    pub l2: ComplexMatrix,
    pub l3: ComplexMatrix,
    /// Gate axis in this frame; the second component is zero.
    pub u_prime: [f64; 3],
    pub sin_psi: f64,
    pub cos_psi: f64,
}

impl RotatedFrame {
    /// `a1 l1 + a2 l2 + a3 l3`
    pub fn dot(&self, a: [f64; 3]) -> ComplexMatrix {
        let mut out = self.l1.scale_real(a[0]);
        out += &self.l2.scale_real(a[1]);
        out += &self.l3.scale_real(a[2]);
        out
    }

    pub fn operators(&self) -> [&ComplexMatrix; 3] {
        [&self.l1, &self.l2, &self.l3]
    }
}

pub fn rotated_frame(law: &ConservedLaw, spec: &GateSpec) -> Result<RotatedFrame> {
    let l = law.direction;
    let u = spec.axis;
    let lxu = cross(l, u);
    let sin_psi = norm3(lxu);
    if sin_psi <= MIN_SIN_PSI {
        return Err(Error::FrameDegenerate { sin_psi });
    }
    let cos_psi = dot3(l, u).clamp(-1.0, 1.0);
    let l3 = pauli_dot(l);
    let l2 = pauli_dot([lxu[0] / sin_psi, lxu[1] / sin_psi, lxu[2] / sin_psi]);
    let l1 = (&l2 * &l3).scale(Complex64::new(0.0, -1.0));
    Ok(RotatedFrame {
        l1,
        l2,
        l3,
        u_prime: [sin_psi, 0.0, cos_psi],
        sin_psi,
        cos_psi,
    })
}
