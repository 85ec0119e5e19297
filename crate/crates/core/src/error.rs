use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("dataset is empty")]
    Empty,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("record {index}: expected dimension {expected}, got {found} in `{field}`")]
    DimensionMismatch {
        index: usize,
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("record {index}: non-finite entry in `{field}`")]
    NonFinite { index: usize, field: &'static str },
    #[error("records {first} and {second} share the same point with conflicting value or gradient")]
    ConflictingDuplicate { first: usize, second: usize },
    #[error("index {index} out of range for dataset of size {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain box does not contain data point {index}")]
    BoxExcludesPoint { index: usize },
    #[error("query dimension {found} does not match dataset dimension {expected}")]
    QueryDimension { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, JetError>;
