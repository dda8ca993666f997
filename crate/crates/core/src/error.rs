use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("required column absent: {0}")]
    MissingColumn(String),

    #[error("row {row}, column '{column}': cannot parse {value:?}")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid length of stay {0:?}")]
    ParseLos(String),

    #[error("empty dataset after cleaning")]
    EmptyAfterCleaning,

    #[error("column '{column}': label {label:?} is not in the explicit category order")]
    UnorderedLabel { column: String, label: String },

    #[error("column '{0}' has no fitted ordinal map")]
    UnfittedColumn(String),

    #[error("length of stay {0} outside [1, 120]")]
    LosOutOfRange(i64),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("model file version {found} does not match supported version {expected}")]
    VersionMismatch { found: u64, expected: u64 },

    #[error("unknown model type {0:?}")]
    UnknownModelType(String),

    #[error("config: {0}")]
    Config(String),

    #[error("all {0} search trials failed")]
    AllTrialsFailed(usize),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True for errors caused by bad configuration or bad parameters rather
    /// than by the data or the environment.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
