use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Solver(#[from] rsqo::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("no start point with constraint violation <= {tol:e} (best {violation:e})")]
    NoFeasibleStart { tol: f64, violation: f64 },
    #[error("invalid parameters: {0}")]
    Params(String),
}

impl From<rsqo::ManifoldError> for BenchError {
    fn from(e: rsqo::ManifoldError) -> Self {
        BenchError::Solver(e.into())
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
