use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("validation error at level {level}: {message}")]
    Validation { level: usize, message: String },

    #[error("capacity exceeded: {what} ({requested} > limit {limit})")]
    Capacity {
        what: String,
        requested: u128,
        limit: u128,
    },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("degenerate weight: zero mass on block {block} of level {level}")]
    DegenerateWeight { level: usize, block: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("empty estimate: no candidate test functions")]
    EmptyEstimate,

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    pub(crate) fn validation(level: usize, message: impl Into<String>) -> Self {
        LabError::Validation {
            level,
            message: message.into(),
        }
    }

    pub(crate) fn param(message: impl Into<String>) -> Self {
        LabError::Parameter(message.into())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Schema(e.to_string())
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
