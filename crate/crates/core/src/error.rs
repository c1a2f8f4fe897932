use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: need at least {needed} points per dimension, got {got}")]
    GridTooSmall { needed: usize, got: usize },
    #[error("dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("mismatched field layouts: {0}")]
    Mismatch(String),
    #[error("cutoff {requested} exceeds available cutoff {available}")]
    CutoffExceeded { requested: u32, available: u32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}
