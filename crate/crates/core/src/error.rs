use thiserror::Error;

/// Errors produced by the grid, energy, operator and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid axis {axis} has {nodes} nodes; at least 3 are required")]
    DegenerateGrid { axis: usize, nodes: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is singular or not positive definite")]
    NotPositiveDefinite,
    #[error("degenerate Gram matrix (det A = {det:e}, trace = {trace:e})")]
    DegenerateGram { det: f64, trace: f64 },
    #[error("map is not invertible (det = {0:e})")]
    SingularMap(f64),
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("solver stagnated: {0}")]
    Stagnation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("sampling window is empty")]
    EmptyWindow,
    #[error("scale out of range: {0}")]
    ScaleRange(String),
    #[error("field format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
