use thiserror::Error;

/// Errors raised while evaluating, integrating or solving a smoothed problem.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum OcpError {
    #[error("control weight matrix is not symmetric positive definite: {0}")]
    SingularCostWeight(String),

    #[error("degenerate state constraint: |S_x F R^-1 F^T S_x^T| = {denominator:e} below guard {threshold:e}")]
    DegenerateConstraint { denominator: f64, threshold: f64 },

    #[error("dynamics singularity: {0}")]
    Singularity(String),

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("step size underflow at t = {t} (h = {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("maximum number of integration steps ({max_steps}) exceeded at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },

    #[error("shooting did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("shooting Jacobian is singular (reciprocal condition {rcond:e})")]
    SingularJacobian { rcond: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, OcpError>;
