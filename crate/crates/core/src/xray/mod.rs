//! The weighted X-ray transform on the unit disk and its normal operator.
//!
//! Lines are parametrised by their entry point on the circle of radius
//! `ρ₁ = 1.5` and their direction; the transform integrates
//! `w(y, θ) f(y)` along each line. The adjoint is taken with respect to the
//! discrete `L²` product on the grid and the boundary measure on lines, so
//! [`Projector::normal`] is the discrete normal operator `N_w = I_w^* I_w`.

mod kernel;
mod rays;
mod symbol;
mod transform;
mod weight;

pub use kernel::{calibrate_kernel_constant, kernel_discrepancy, normal_kernel, weight_w, KernelFit};
pub use rays::{Ray, RaySet, Sinogram, DEFAULT_ANGLES, DEFAULT_OFFSETS, DEFAULT_T_STEP};
pub use symbol::{ellipticity_margin, principal_symbol, EllipticityMargin, SYMBOL_CONSTANT};
pub use transform::{adjoint, forward, normal_compose, Projector};
pub use weight::{WeightSpec, WeightTable};
