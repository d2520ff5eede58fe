use thiserror::Error;

use crate::manifold::ManifoldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("constraint index {index} out of range ({count} constraints)")]
    ConstraintIndex { index: usize, count: usize },
    #[error("symmetric eigendecomposition did not converge")]
    Eigen,
    #[error("Newton-KKT matrix is singular")]
    SingularKkt,
    #[error("line search exhausted {backtracks} backtracks without sufficient merit decrease")]
    Stalled { backtracks: usize },
    #[error("linearized constraints are infeasible (minimum total violation {violation:e})")]
    QpInfeasible { violation: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
