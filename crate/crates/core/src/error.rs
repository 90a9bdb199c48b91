use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {field} has length {got}, expected {expected}")]
    DimensionMismatch {
        field: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("non-positive parameter: {0}")]
    NonPositive(String),

    #[error("antenna ordering violated: need M > N > K >= 1, got M={m}, N={n}, K={k}")]
    AntennaOrdering { m: usize, n: usize, k: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid quantization noise for UE {ue}: {value}")]
    InvalidQuant { ue: usize, value: f64 },

    #[error("invalid phase allocation: {0}")]
    InvalidPhases(String),

    #[error("rate constraints infeasible: {0}")]
    Infeasible(String),

    #[error("unsupported size: {0}")]
    Unsupported(String),

    #[error("solver failed to converge: {0}")]
    Convergence(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
