//! Lower bounds on the infidelity of single-qubit gates implemented under an
//! additive conservation law, together with the machinery needed to check
//! them against explicit implementations: a small dense complex linear
//! algebra kernel, Bloch-sphere geometry, quantum channels built from a joint
//! unitary and an ancilla, and generators of conservation-respecting
//! unitaries.
//!
//! Conventions: `hbar = 1`; tensor products are ordered system first, so a
//! joint basis index is `s * ancilla_dim + a`.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch;
pub mod bounds;
pub mod channel;
mod error;
pub mod linalg;
pub mod models;
pub mod verify;

pub use bloch::{ConservedLaw, GateSpec, GeometryReport, RotatedFrame};
pub use bounds::BoundReport;
pub use channel::{AncillaState, DeviationReport, FidelityOptions, FidelityResult, Implementation};
pub use error::{Error, Result};
pub use linalg::ComplexMatrix;
pub use num_complex::Complex64;
