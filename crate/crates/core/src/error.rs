use alloc::string::String;
use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("site count mismatch: {left} vs {right}")]
    SiteMismatch { left: usize, right: usize },
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("size guard exceeded for {what}: {size} > {limit}")]
    SizeGuard {
        what: &'static str,
        size: usize,
        limit: usize,
    },
    #[error("polar factor of a zero matrix is undefined")]
    ZeroMatrix,
    #[error("operator is not Hermitian (relative deviation {0:e})")]
    NotHermitian(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;
