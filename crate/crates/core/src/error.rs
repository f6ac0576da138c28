use thiserror::Error;

/// Errors raised by the numerical kernels and filters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The argument lies outside the domain where a map is invertible
    /// (rotation angle at π for the logarithm, 2π for the inverse Jacobian).
    #[error("outside the domain of {op}: angle {angle:.9} rad")]
    Domain { op: &'static str, angle: f64 },

    #[error("matrix is not skew-symmetric (max |M + Mᵀ| = {0:e})")]
    NotSkew(f64),

    #[error("matrix is not a rotation: {0}")]
    NotRotation(String),

    #[error("covariance is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("innovation covariance is singular (condition number {0:e})")]
    SingularInnovation(f64),

    /// The two prior ellipsoids cannot be combined at the requested gain.
    #[error("ellipsoids have empty intersection (d² = {0})")]
    EmptyIntersection(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
