use thiserror::Error;

/// Errors raised across the forest engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("input is empty")]
    Empty,

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("variable `{0}`: {1}")]
    Variable(String, String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label {label} out of range for factor with {label_count} labels")]
    LabelOutOfRange { label: usize, label_count: usize },

    #[error("split is inadmissible: {0}")]
    InadmissibleSplit(&'static str),

    #[error("not enough events: need {required}, found {found}")]
    InsufficientEvents { required: usize, found: usize },

    #[error("no comparable pairs for concordance")]
    NoComparablePairs,

    #[error("malformed model: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
