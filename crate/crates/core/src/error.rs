use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{0}: matrix is not square ({1}x{2})")]
    NotSquare(&'static str, usize, usize),
    #[error("{0}: non-finite entry")]
    NonFinite(&'static str),
    #[error("{0}: matrix is not symmetric (asymmetry {1:e})")]
    NotSymmetric(&'static str, f64),
    #[error("{0}: matrix is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("singular matrix (pivot {0:e})")]
    Singular(f64),
    #[error("{0} did not converge within {1} iterations")]
    NoConvergence(&'static str, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("size guard exceeded: {0}")]
    GuardExceeded(String),
    #[error("sphere search found no lattice point within the initial radius")]
    Infeasible,
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
