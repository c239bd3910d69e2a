//! Closed-form lower bounds on gate infidelity `1 - F^2`.
//!
//! All bounds take the gate rotation angle `theta`, the relative angle `psi`
//! between the gate axis and the conservation direction, and
//! `sigma = sigma(L_A / c)`, the ancilla's standard deviation of the
//! conserved quantity in units of the qubit's maximal one.
//!
//! Two families are provided. [`bound_main`] comes from the uncertainty
//! relation between the deviation operator of `L_S` and `L`; it vanishes for
//! a half-turn about an axis orthogonal to `l`. [`bound_alt`] uses the two
//! transverse components of the rotated Pauli frame instead and stays
//! positive there. Neither dominates the other.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{gamma_from, rotation_overlap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub theta: f64,
    pub psi: f64,
    pub sigma: f64,
    pub bound_main: f64,
    pub bound_alt: f64,
    pub bound_alt_simplified: f64,
    pub v_norm: f64,
    pub w_norm: f64,
    pub two_gamma: f64,
}

impl BoundReport {
    pub fn evaluate(theta: f64, psi: f64, sigma: f64) -> Self {
        let (v_norm, w_norm) = vw_norms(theta, psi);
        Self {
            theta,
            psi,
            sigma,
            bound_main: bound_main(theta, psi, sigma),
            bound_alt: bound_alt(theta, psi, sigma),
            bound_alt_simplified: bound_alt_simplified(theta, psi, sigma),
            v_norm,
            w_norm,
            two_gamma: gamma_from(theta, psi),
        }
    }

    /// The larger of the two independent bounds.
    pub fn best(&self) -> f64 {
        self.bound_main.max(self.bound_alt)
    }
}

/// `s (1 - s) / (1 + sigma^2)` with `s = sin^2(theta/2) sin^2(psi)`.
pub fn bound_main(theta: f64, psi: f64, sigma: f64) -> f64 {
    let s = rotation_overlap(theta, psi);
    s * (1.0 - s) / (1.0 + sigma * sigma)
}

/// Half-turn case of [`bound_main`]: `sin^2(2 psi) / (4 (1 + sigma^2))`.
pub fn bound_self_adjoint(psi: f64, sigma: f64) -> f64 {
    let s2 = (2.0 * psi).sin();
    s2 * s2 / (4.0 * (1.0 + sigma * sigma))
}

/// Norms of the coefficient vectors `v` and `w` in the rotated-frame
/// commutator identities, in closed form.
pub fn vw_norms(theta: f64, psi: f64) -> (f64, f64) {
    let (sh, ch) = (0.5 * theta).sin_cos();
    let (ch2, sh2) = (ch * ch, sh * sh);
    let cp2 = psi.cos().powi(2);
    let common = ch2 + cp2 * sh2;
    let v = (ch2 + cp2 * sh2 * common).sqrt();
    let w = (cp2 * sh2 + ch2 * common).sqrt();
    (v.min(1.0), w.min(1.0))
}

/// Components of `v`, in the rotated frame `(l1, l2, l3)`.
pub fn v_vector(theta: f64, psi: f64) -> [f64; 3] {
    let (sh, ch) = (0.5 * theta).sin_cos();
    let (sp, cp) = psi.sin_cos();
    [2.0 * cp * sh * ch, cp * cp * sh * sh - ch * ch, -sp * sh * ch]
}

/// Components of `w`, in the rotated frame `(l1, l2, l3)`.
pub fn w_vector(theta: f64, psi: f64) -> [f64; 3] {
    let (sh, ch) = (0.5 * theta).sin_cos();
    let (sp, cp) = psi.sin_cos();
    [cp * cp * sh * sh - ch * ch, -2.0 * cp * sh * ch, -sp * cp * sh * sh]
}

fn alt_denominator(sigma: f64) -> f64 {
    let d = 1.0 + (1.0 + sigma * sigma).sqrt();
    d * d
}

/// `[1 - (|v| + |w|)/2]^2 / (1 + sqrt(1 + sigma^2))^2`
pub fn bound_alt(theta: f64, psi: f64, sigma: f64) -> f64 {
    let (v, w) = vw_norms(theta, psi);
    let bracket = 1.0 - 0.5 * (v + w);
    debug_assert!(bracket >= -1e-12, "bracket {bracket} < 0");
    bracket.max(0.0).powi(2) / alt_denominator(sigma)
}

/// Looser form of [`bound_alt`] depending on `(theta, psi)` only through `s`:
/// `[1 - sqrt((1 - s)(2 - s)/2)]^2 / (1 + sqrt(1 + sigma^2))^2`.
pub fn bound_alt_simplified(theta: f64, psi: f64, sigma: f64) -> f64 {
    let s = rotation_overlap(theta, psi);
    let bracket = 1.0 - ((1.0 - s) * (2.0 - s) / 2.0).sqrt();
    bracket.max(0.0).powi(2) / alt_denominator(sigma)
}

/// Same value as [`bound_alt_simplified`], written with the rotation
/// separation angle `gamma`: `[1 - |cos g| sqrt(1 + cos^2 g) / sqrt 2]^2`.
pub fn bound_alt_simplified_from_gamma(two_gamma: f64, sigma: f64) -> f64 {
    let cg = (0.5 * two_gamma).cos().abs();
    let bracket = 1.0 - cg * (1.0 + cg * cg).sqrt() / std::f64::consts::SQRT_2;
    bracket.max(0.0).powi(2) / alt_denominator(sigma)
}

/// Bound under full rotational symmetry, maximized over all conservation
/// directions. `ancilla_norm` is `||2 L_A||` (`N` for a spin-`N/2` ancilla).
pub fn bound_rotational(theta: f64, ancilla_norm: f64) -> f64 {
    let denom = 4.0 * (1.0 + ancilla_norm * ancilla_norm);
    if theta <= std::f64::consts::FRAC_PI_2 {
        theta.sin().powi(2) / denom
    } else {
        1.0 / denom
    }
}

/// `|| [U_S^dag L_S U_S, L_S] || = 4 c^2 sqrt(s (1 - s))`
pub fn commutator_norm_closed(theta: f64, psi: f64, c: f64) -> f64 {
    let s = rotation_overlap(theta, psi);
    4.0 * c * c * (s * (1.0 - s)).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub psi: f64,
    pub bound_main: f64,
    pub bound_alt: f64,
    pub bound_alt_simplified: f64,
}

/// Evaluates the bounds on `points` equally spaced `psi` in `[0, pi/2]`,
/// endpoints included.
pub fn sweep(theta: f64, sigma: f64, points: usize) -> Vec<SweepRow> {
    assert!(points >= 2, "a sweep needs at least two points");
    let step = std::f64::consts::FRAC_PI_2 / (points - 1) as f64;
    (0..points)
        .into_par_iter()
        .map(|k| {
            let psi = if k == points - 1 {
                std::f64::consts::FRAC_PI_2
            } else {
                k as f64 * step
            };
            SweepRow {
                psi,
                bound_main: bound_main(theta, psi, sigma),
                bound_alt: bound_alt(theta, psi, sigma),
                bound_alt_simplified: bound_alt_simplified(theta, psi, sigma),
            }
        })
        .collect()
}
