use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("subproblem reported infeasible: {0}")]
    Infeasible(String),

    #[error("subproblem reported unbounded: {0}")]
    Unbounded(String),

    #[error("binary variable count {found} exceeds exactness cap {cap}; use the sampling heuristic")]
    BinaryCapExceeded { found: usize, cap: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
