use thiserror::Error;

/// Errors raised by the numerical operations of this crate.
///
/// Hypothesis failures (a singular differential, a zero stability constant)
/// are not errors: they are reported as values inside the relevant report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("finite-difference order {0} is not supported (maximum is 4)")]
    UnsupportedOrder(usize),

    #[error("kernel evaluated at coincident points x = y = ({0}, {1})")]
    SingularPoint(f64, f64),

    #[error("matrix with {nodes} nodes per side exceeds the limit of {limit}; use a coarser grid (smaller N) or a matrix-free evaluation")]
    TooLarge { nodes: usize, limit: usize },

    #[error("eigensolve did not converge: relative residual {residual:e} exceeds {tolerance:e}")]
    NumericFailure { residual: f64, tolerance: f64 },

    #[error("resolution too coarse: {reason}; need at least N = {min_points} points per side")]
    Resolution { reason: String, min_points: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
