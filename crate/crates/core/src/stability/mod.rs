//! The normal operator as a matrix and the stability constants it carries.
//!
//! Stability of `f ↦ N_w f` from `L²(Ω)` to `H¹(Ω₁)` is measured by the
//! smallest generalised singular value of the assembled matrix. A weight
//! that stays away from zero in some direction perpendicular to every
//! covector keeps that value bounded below as the grid is refined; a weight
//! vanishing on an open cone of directions does not.

mod matrix;
mod probe;

pub use matrix::{
    least_stable_direction, perturbation_scan, stability_constant, stability_sweep, OperatorMatrix, PerturbationScan, StabilityEntry,
    StabilityReport, EIGEN_TOLERANCE, MAX_MATRIX_NODES,
};
pub use probe::{
    coherent_state, injectivity_identity_check, injectivity_identity_check_against, symbol_probe, CoherentProbe,
    ContinuumNormal, ProbeReport,
};
