use thiserror::Error;

/// Errors raised by the estimation, testing and simulation routines.
#[derive(Debug, Error)]
pub enum MirError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series too short: need at least {needed} observations, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("degenerate ratio at index {index} for scale {scale}: both block sums are zero")]
    DegenerateRatio { index: usize, scale: usize },

    #[error("empty scale grid for n = {n}, p = {p}")]
    EmptyGrid { n: usize, p: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("degenerate regression: {0}")]
    Degenerate(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("unsupported significance level {0}; tabulated levels are 0.01, 0.05 and 0.10")]
    UnsupportedLevel(f64),

    #[error("circulant embedding failed: smallest eigenvalue {min_eigenvalue:e} at size {size}")]
    Embedding { min_eigenvalue: f64, size: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl MirError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        MirError::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, MirError>;
