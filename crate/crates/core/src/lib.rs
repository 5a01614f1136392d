//! A numerical laboratory for stability of inverse problems by linearization.
//!
//! The crate is organised along the chain of ideas it exercises:
//!
//! * [`grid`]: periodic grids, discrete Fourier analysis, Sobolev and `C^k`
//!   norms and the interpolation inequality that turns linear stability into
//!   nonlinear Hölder stability;
//! * [`seq`]: a sequence-space map whose injective linearisation has no
//!   stability estimate and which, accordingly, has spurious zeros arbitrarily
//!   close to the origin;
//! * [`xray`]: the weighted X-ray transform on the unit disk, its adjoint
//!   with respect to the boundary measure, the normal operator as a
//!   composition and as a singular integral, and its principal symbol;
//! * [`stability`]: the normal operator as a matrix, stability constants as
//!   generalised singular values, perturbation scans and coherent-state
//!   symbol probes;
//! * [`holder`]: finite-dimensional Lipschitz stability, the quadratic
//!   remainder estimate and an empirical conditional Hölder estimate.
//!
//! The companion book under `book/` walks through each chapter; its Rust
//! snippets are compiled and run as doctests of this crate.

pub mod error;
pub mod grid;
pub mod holder;
pub mod samples;
pub mod seq;
pub mod stability;
pub mod xray;

pub use error::{Error, Result};

/// A point or covector in the plane.
pub type Point = [f64; 2];

/// Radius of the disk `Ω` carrying the unknowns.
pub const OMEGA_RADIUS: f64 = 1.0;

/// Radius of the larger disk `Ω₁` on which data and normal-operator output live.
pub const OMEGA1_RADIUS: f64 = 1.5;

/// Default side of the periodic box.
pub const DEFAULT_BOX_SIDE: f64 = 4.0;

// The book's snippets run as doctests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/grids.md")]
    mod grids {}
    #[doc = include_str!("../../../book/src/sequences.md")]
    mod sequences {}
    #[doc = include_str!("../../../book/src/xray.md")]
    mod xray {}
    #[doc = include_str!("../../../book/src/symbol.md")]
    mod symbol {}
    #[doc = include_str!("../../../book/src/stability.md")]
    mod stability {}
    #[doc = include_str!("../../../book/src/probes.md")]
    mod probes {}
    #[doc = include_str!("../../../book/src/holder.md")]
    mod holder {}
}
