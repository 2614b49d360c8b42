use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("metric is not positive definite at node {node} (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { node: usize, min_eigenvalue: f64 },
    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },
    #[error("operation requires a flat (constant) background metric")]
    NonFlatBackground,
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed snapshot: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
