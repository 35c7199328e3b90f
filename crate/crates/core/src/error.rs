use thiserror::Error;

use crate::cpnet::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("row {row} has {found} cells, expected {expected}")]
    Shape { row: usize, expected: usize, found: usize },

    /// A data cell that is not a finite real. `row` and `column` are zero-based
    /// data coordinates (the header row is not counted).
    #[error("row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid preference network:\n{0}")]
    Validation(ValidationReport),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid assignment: {0}")]
    Assignment(String),

    #[error("degenerate utility: every node has a single-value domain")]
    DegenerateUtility,

    #[error("utility overflow: generated utilities exceed exact integer range")]
    UtilityOverflow,

    #[error("{line}:{column}: syntax error: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error("{line}:{column}: {message}")]
    Semantic {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("binding error: {0}")]
    Binding(String),

    #[error("degenerate query: {0}")]
    DegenerateQuery(String),

    #[error("malformed document: {0}")]
    Document(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        if err.is_io() {
            Error::Io(err.into())
        } else {
            Error::Document(err.to_string())
        }
    }
}
