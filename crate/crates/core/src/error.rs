use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("field format: {0}")]
    Format(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    /// The discretized Dirichlet operator looks singular.
    #[error("assumption-A violation suspected: {0}")]
    AssumptionA(String),

    #[error("solver failed: {message} (relative residual {residual:.3e})")]
    Solver { message: String, residual: f64 },

    #[error("not gauge-equivalent: {0}")]
    NotGaugeEquivalent(String),

    #[error("ill-conditioned: {0}")]
    Conditioning(String),

    #[error("extrapolation did not converge: {0}")]
    Extrapolation(String),

    #[error("inconsistent data: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, Error>;
