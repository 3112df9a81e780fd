//! Verification tolerances.

/// Exact-engine identities (relative Frobenius residual of quadratic-form data).
pub const EXACT: f64 = 1e-12;
/// Lie-algebra closure and Jacobi residuals.
pub const ALGEBRA: f64 = 1e-10;
/// Primary quadratic relation on sampled points (relative).
pub const PRIMARY: f64 = 1e-10;
/// Secondary relations and energy formula on sampled points (relative).
pub const SAMPLED: f64 = 1e-9;
/// Pullback identities.
pub const PULLBACK: f64 = 1e-9;
/// Finite-difference oracle agreement.
pub const ORACLE: f64 = 1e-6;
/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Conserved-quantity drift along a trajectory.
pub const DRIFT: f64 = 1e-8;
/// Excluded neighbourhood of Z = 0.
pub const DOMAIN_EPS: f64 = 1e-9;
/// Hermiticity drift that is silently symmetrized away.
pub const HERMITIAN_SNAP: f64 = 1e-12;
/// Hermiticity drift above which construction fails.
pub const HERMITIAN_REJECT: f64 = 1e-6;
/// Drop tolerance for Gram–Schmidt.
pub const GRAM_SCHMIDT_DROP: f64 = 1e-10;

/// `|lhs - rhs|` divided by `magnitude`, or the absolute gap when `magnitude` is zero.
pub fn relative(lhs: f64, rhs: f64, magnitude: f64) -> f64 {
    let gap = (lhs - rhs).abs();
    if magnitude > 0.0 {
        gap / magnitude
    } else {
        gap
    }
}
