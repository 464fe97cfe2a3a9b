use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid error: {0}")]
    Grid(String),

    #[error("non-confining potential: {0}")]
    NonConfining(String),

    #[error("basis truncation: {0}")]
    Truncation(String),

    #[error("eigensolver resolution: {0}")]
    Resolution(String),

    #[error("distribution has zero total mass")]
    ZeroMass,

    #[error("kernel hermiticity violated (residual {0:.3e})")]
    Hermiticity(f64),

    #[error("non-hermitian input (residual {0:.3e})")]
    NonHermitian(f64),

    #[error("coupling identity violated: {0}")]
    IdentityViolation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("quadrature failed to converge: {0}")]
    Convergence(String),

    #[error("stiff flow: step size collapsed at t = {0}")]
    Stiffness(f64),

    #[error("flow not converged at t_max (|domega/dt| = {0:.3e})")]
    NotConverged(f64),

    #[error("period undefined: fixed-point frequency is zero")]
    PeriodUndefined,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
