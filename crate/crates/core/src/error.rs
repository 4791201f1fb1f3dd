use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("block {block} covariance is not positive definite (pivot {pivot})")]
    BlockNotPositiveDefinite { block: usize, pivot: usize },

    #[error("conditional variance is not positive at ordered index {index}")]
    NonPositiveConditionalVariance { index: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not symmetric (entry {row},{col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("size guard: {what} is {size}, limit is {limit}")]
    SizeGuard { what: &'static str, size: usize, limit: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty point set")]
    EmptyPointSet,
}

pub type Result<T> = std::result::Result<T, Error>;
