use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for {n} items")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("item count {n} is too large ({reason})")]
    TooLarge { n: usize, reason: &'static str },

    #[error("malformed comparison: {0}")]
    MalformedComparison(String),

    #[error("row {row} has zero norm")]
    ZeroNormRow { row: usize },

    #[error("landmark set is empty after resampling")]
    EmptyLandmarks,

    #[error("linkage strategy violated its contract: {0}")]
    ContractViolation(String),

    #[error("partitions cover different item sets")]
    MismatchedItems,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(path: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
