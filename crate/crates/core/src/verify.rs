//! Seeded property suites over random laws, gates and implementations.
//!
//! Each sample draws from its own ChaCha stream, so a report depends only on
//! `(suite, samples, seed)`. Every property is reported as the largest
//! residual seen, where a residual at or below the tolerance is a pass; for
//! inequalities the residual is the signed shortfall, so negative values
//! mean slack.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{relative_angle, standard_conserved};
use crate::bounds::{bound_alt, bound_main, commutator_norm_closed};
use crate::channel::{
    apply_channel, deviation_basis, deviation_fidelity_gap, deviation_report, mixed_channel_equivalence,
    rotated_deviations, sigma_ancilla, tomography_inputs, worst_case_fidelity_on, AncillaState, FidelityOptions,
    Implementation, SphereGrid,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::{operator_norm, ComplexMatrix};
use crate::models::{
    commutant_blocks, random_constrained_implementation, random_density, random_gate, random_law, random_pure_state,
    sample_constrained_unitary_with,
};

/// Ancilla dimensions cycled through by the suites.
pub const ANCILLA_DIMS: [usize; 4] = [2, 3, 4, 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    NormFormula,
    Robertson,
    Deviation,
    Appendix,
    Dominance,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::NormFormula, Suite::Robertson, Suite::Deviation, Suite::Appendix, Suite::Dominance];

    pub fn name(self) -> &'static str {
        match self {
            Suite::NormFormula => "normformula",
            Suite::Robertson => "robertson",
            Suite::Deviation => "deviation",
            Suite::Appendix => "appendix",
            Suite::Dominance => "dominance",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .map_or_else(|| invalid(format!("unknown suite '{s}'")), Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    /// Samples on which the property was evaluated.
    pub evaluated: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub samples: usize,
    pub seed: u64,
    pub properties: Vec<PropertyCheck>,
    pub passed: bool,
}

/// Per-sample stream of a suite run.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

struct Spec {
    name: &'static str,
    tolerance: f64,
}

/// Runs `sample` on every index and folds the residual vectors property by
/// property. `None` entries are skipped.
fn run(
    suite: Suite,
    samples: usize,
    seed: u64,
    specs: &[Spec],
    sample: impl Fn(&mut ChaCha8Rng, usize) -> Vec<Option<f64>> + Sync,
) -> SuiteReport {
    let rows: Vec<Vec<Option<f64>>> = (0..samples)
        .into_par_iter()
        .map(|k| sample(&mut sample_rng(seed, k), k))
        .collect();
    let properties: Vec<PropertyCheck> = specs
        .iter()
        .enumerate()
        .map(|(p, spec)| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r[p]).collect();
            let max_residual = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let max_residual = if vals.is_empty() { 0.0 } else { max_residual };
            PropertyCheck {
                name: spec.name.to_string(),
                max_residual,
                tolerance: spec.tolerance,
                evaluated: vals.len(),
                passed: vals.iter().all(|v| *v <= spec.tolerance && v.is_finite()),
            }
        })
        .collect();
    let passed = properties.iter().all(|p| p.passed);
    SuiteReport {
        suite,
        samples,
        seed,
        properties,
        passed,
    }
}

pub fn run_suite(suite: Suite, samples: usize, seed: u64) -> SuiteReport {
    match suite {
        Suite::NormFormula => normformula(samples, seed),
        Suite::Robertson => robertson(samples, seed),
        Suite::Deviation => deviation(samples, seed),
        Suite::Appendix => appendix(samples, seed),
        Suite::Dominance => dominance(samples, seed),
    }
}

fn random_hermitian_2(rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let g = crate::models::ginibre(rng, 2, 2);
    (&g + &g.adjoint()).scale_real(rng.random_range(0.2..2.0))
}

fn normformula(samples: usize, seed: u64) -> SuiteReport {
    let specs = [
        Spec { name: "commutator_norm_formula", tolerance: 1e-10 },
        Spec { name: "standard_form_reconstruction", tolerance: 1e-12 },
    ];
    run(Suite::NormFormula, samples, seed, &specs, |rng, _| {
        let ls = random_hermitian_2(rng);
        let law = match standard_conserved(&ls, ComplexMatrix::zeros(1, 1)) {
            Ok(law) => law,
            Err(_) => return vec![None, None],
        };
        let gate = random_gate(rng);
        let us = gate.matrix();
        let l = law.qubit_operator();
        let rotated = &(&us.adjoint() * &l) * &us;
        let numeric = operator_norm(&rotated.commutator(&l));
        let psi = relative_angle(&gate, &law).psi;
        let closed = commutator_norm_closed(gate.theta, psi, law.c);
        vec![Some((numeric - closed).abs()), Some(l.max_abs_diff(&ls.hermitian_part()))]
    })
}

fn robertson(samples: usize, seed: u64) -> SuiteReport {
    let specs = [
        Spec { name: "robertson_slack", tolerance: 1e-9 },
        Spec { name: "variance_bounded_by_mean_square", tolerance: 1e-10 },
    ];
    run(Suite::Robertson, samples, seed, &specs, |rng, k| {
        let da = ANCILLA_DIMS[k % ANCILLA_DIMS.len()];
        let law = random_law(rng, da);
        let gate = random_gate(rng);
        let imp = random_constrained_implementation(rng, &law);
        let psi = random_pure_state(rng, 2);
        let rep = deviation_report(&imp, &gate, &law, &psi).expect("pure ancilla");
        vec![Some(-rep.robertson_slack), Some(rep.variance - rep.mean_square)]
    })
}

fn deviation(samples: usize, seed: u64) -> SuiteReport {
    let specs = [
        Spec { name: "mean_square_identity", tolerance: 1e-10 },
        Spec { name: "deviation_fidelity_gap", tolerance: 1e-7 },
        Spec { name: "rotated_commutation_identities", tolerance: 1e-9 },
    ];
    let grid_opts = FidelityOptions::default();
    run(Suite::Deviation, samples, seed, &specs, |rng, k| {
        let da = ANCILLA_DIMS[k % ANCILLA_DIMS.len()];
        let law = random_law(rng, da);
        let gate = random_gate(rng);
        let imp = random_constrained_implementation(rng, &law);

        let basis = deviation_basis(&imp, &gate, &law).expect("pure ancilla");
        let zeta = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
        let delta = rng.random_range(0.0..std::f64::consts::TAU);
        let rep = deviation_report(&imp, &gate, &law, &basis.input_state(zeta, delta)).expect("pure ancilla");
        let identity = (rep.mean_square - basis.mean_square(zeta)).abs();

        let gap = deviation_fidelity_gap(&imp, &gate, &law, &grid_opts).expect("pure ancilla");

        let frame_ok = crate::bloch::rotated_frame(&law, &gate).map(|f| f.sin_psi > 0.1).unwrap_or(false);
        let rotated = frame_ok.then(|| {
            let rd = rotated_deviations(&imp, &gate, &law).expect("frame checked");
            rd.identity_residuals[0].max(rd.identity_residuals[1])
        });
        vec![Some(identity), Some(-gap), rotated]
    })
}

fn appendix(samples: usize, seed: u64) -> SuiteReport {
    let specs = [
        Spec { name: "channel_equivalence", tolerance: 1e-10 },
        Spec { name: "worst_fidelity_agreement", tolerance: 1e-7 },
    ];
    let grid = SphereGrid::new(FidelityOptions::default());
    run(Suite::Appendix, samples, seed, &specs, |rng, k| {
        let da = [2, 3, 4][k % 3];
        let law = random_law(rng, da);
        let gate = random_gate(rng);
        let u = sample_constrained_unitary_with(&commutant_blocks(&law), rng);
        let rank = rng.random_range(1..=da);
        let rho = random_density(rng, da, rank);
        let imp = Implementation::new(AncillaState::Mixed(rho), u).expect("valid by construction");
        let equivalence = mixed_channel_equivalence(&imp).expect("valid mixed state");
        let (extended, _) = imp.purified().expect("valid mixed state");
        let direct = worst_case_fidelity_on(&grid, &imp, &gate).worst_fidelity;
        let purified = worst_case_fidelity_on(&grid, &extended, &gate).worst_fidelity;
        vec![Some(equivalence), Some((direct - purified).abs())]
    })
}

fn dominance(samples: usize, seed: u64) -> SuiteReport {
    let specs = [Spec { name: "infidelity_dominates_bounds", tolerance: 1e-7 }];
    let grid = SphereGrid::new(FidelityOptions::default());
    run(Suite::Dominance, samples, seed, &specs, |rng, k| {
        let da = ANCILLA_DIMS[k % ANCILLA_DIMS.len()];
        let law = random_law(rng, da);
        let gate = random_gate(rng);
        let imp = random_constrained_implementation(rng, &law);
        vec![Some(dominance_shortfall(&grid, &imp, &gate, &law))]
    })
}

/// `max(bound_main, bound_alt) - (1 - F^2)` for one implementation; at most
/// numerical noise whenever the bounds hold.
pub fn dominance_shortfall(
    grid: &SphereGrid,
    imp: &Implementation,
    gate: &crate::GateSpec,
    law: &crate::ConservedLaw,
) -> f64 {
    let fid = worst_case_fidelity_on(grid, imp, gate);
    let psi = relative_angle(gate, law).psi;
    let sigma = sigma_ancilla(imp.ancilla_state(), law);
    let bound = bound_main(gate.theta, psi, sigma).max(bound_alt(gate.theta, psi, sigma));
    bound - fid.infidelity()
}

/// Largest entrywise output difference of two implementations over
/// [`tomography_inputs`].
pub fn channel_distance(a: &Implementation, b: &Implementation) -> Result<f64> {
    let mut worst = 0.0f64;
    for rho in tomography_inputs() {
        worst = worst.max(apply_channel(a, &rho)?.max_abs_diff(&apply_channel(b, &rho)?));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_runs_pass_and_are_deterministic() {
        for s in Suite::ALL {
            let a = run_suite(s, 12, 7);
            assert!(a.passed, "{a:?}");
            assert_eq!(a, run_suite(s, 12, 7));
        }
    }

    #[test]
    fn report_flags_failures() {
        let specs = [Spec { name: "always_fails", tolerance: 0.0 }];
        let r = run(Suite::NormFormula, 3, 0, &specs, |_, _| vec![Some(1.0)]);
        assert!(!r.passed);
        assert_eq!(r.properties[0].evaluated, 3);
        let r = run(Suite::NormFormula, 3, 0, &specs, |_, _| vec![None]);
        assert!(r.passed && r.properties[0].evaluated == 0);
    }

    #[test]
    fn idle_implementation_respects_bounds() {
        let law = crate::models::NamedLaw::Z.build(2);
        let u = ComplexMatrix::identity(4);
        let imp = Implementation::pure(crate::linalg::basis_vector(2, 0), u).unwrap();
        let grid = SphereGrid::new(FidelityOptions::default());
        assert!(dominance_shortfall(&grid, &imp, &crate::GateSpec::pauli_x(), &law) < 0.0);
        let _ = channel_distance(&imp, &imp).unwrap();
    }
}
