use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point lies outside the domain closure")]
    OutsideDomain,
    #[error("fields live on different grids: {0}")]
    GridMismatch(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("operator is not positive definite: {0}")]
    Indefinite(String),
    #[error("iteration did not converge: {0}")]
    NotConverged(String),
    #[error("regime refused: {0}")]
    Regime(String),
    #[error("postcondition violated: {0}")]
    Postcondition(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
