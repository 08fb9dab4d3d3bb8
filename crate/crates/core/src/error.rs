use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid channel spec: {0}")]
    InvalidSpec(String),

    #[error("invalid power budget: {0}")]
    InvalidBudget(String),

    #[error("index out of range: {what} = {value} not in {range}")]
    OutOfRange {
        what: &'static str,
        value: i64,
        range: String,
    },

    #[error("allocation geometry violated: {0}")]
    Geometry(String),

    #[error("off-grid path: {0}")]
    OffGrid(String),

    #[error("dense materialization refused for K = {k} (limit {limit})")]
    TooLarge { k: usize, limit: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
