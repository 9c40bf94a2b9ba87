use thiserror::Error;

/// Errors produced by the group, kernel, quadrature and construction layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },

    #[error("dilation factor must be positive, got {0}")]
    InvalidDilation(f64),

    #[error("kernel singularity: {0}")]
    Singularity(String),

    #[error("node budget of {budget} exceeded")]
    BudgetExceeded { budget: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inconclusive separation: certified gap {min_gap:e} is not positive at depth {depth}")]
    InconclusiveSeparation { min_gap: f64, depth: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported space: {0}")]
    UnsupportedSpace(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
