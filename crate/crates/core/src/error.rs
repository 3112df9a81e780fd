use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("invalid order n = {0}")]
    InvalidOrder(usize),

    #[error("matrix is not hermitian (drift {drift:.3e})")]
    NotHermitian { drift: f64 },

    #[error("quaternion has nonzero real part {0:.3e}, expected imaginary")]
    NotImaginary(f64),

    #[error("position |Z| = {norm:.3e} is inside the excluded region around Z = 0")]
    DomainGuard { norm: f64 },

    #[error("vector is not tangent to the cone (normal residual {residual:.3e})")]
    NotTangent { residual: f64 },

    #[error("tangent basis has dimension {found}, expected {expected}")]
    DegenerateTangentBasis { expected: usize, found: usize },

    #[error("finite-difference step {0:.3e} is too small")]
    StepUnderflow(f64),

    #[error("near collision at t = {t}: |Z| = {norm:.3e}")]
    NearCollision { t: f64, norm: f64 },

    #[error("implicit solve did not converge at t = {t} after {iterations} iterations")]
    NonConvergence { t: f64, iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("magnetic charge must be non-negative, got {0}")]
    NegativeCharge(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
