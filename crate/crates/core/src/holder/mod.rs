//! Nonlinear stability from linear stability.
//!
//! A map whose differential at `x₀` is injective with a stability estimate
//! and whose remainder is quadratic is itself stable near `x₀`. In finite
//! dimensions this gives a Lipschitz bound on an explicit ball
//! ([`findim_lipschitz_check`]). When the linear estimate only holds from a
//! weaker norm, interpolation under an a priori bound in a stronger norm
//! recovers a Hölder estimate ([`holder_fit`]).

mod findim;
mod testmap;

pub use findim::{findim_lipschitz_check, FinDimMap, FinDimReport, Hypothesis, Powers};
pub use testmap::{
    check_exponents, holder_fit, remainder_bound_estimate, sample_directions, HolderReport, HolderSample,
    HolderSettings, HolderSpaces, RemainderReport, TestMap, HOLDER_SPACES, MU1, MU2, REMAINDER_TOLERANCE,
    SLOPE_TOLERANCE,
};
