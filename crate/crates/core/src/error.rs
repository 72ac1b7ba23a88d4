use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("query has no tokens")]
    EmptyQuery,

    #[error("malformed annotated line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("segmentation length mismatch: expected {expected} boundaries, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("no token survives the minimum count")]
    EmptyVocab,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("dimension mismatch at line {line}: expected {expected}, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },

    #[error("feature length {found} does not match model input {expected}")]
    FeatureLength { expected: usize, found: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("query of {0} tokens exceeds the exhaustive-search limit")]
    TooLong(usize),

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn malformed(line: usize, reason: impl Into<String>) -> Self {
        Error::MalformedLine {
            line,
            reason: reason.into(),
        }
    }
}
