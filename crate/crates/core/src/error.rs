use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the attack pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("empty document `{0}`")]
    EmptyDocument(String),

    #[error("empty token sequence")]
    EmptySequence,

    #[error("unknown document id `{0}`")]
    UnknownDocument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("span {start}..{end} out of bounds for length {len}")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },

    #[error("overlapping spans at {0}..{1}")]
    OverlappingSpans(usize, usize),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config hash mismatch: checkpoint {expected}, config {found}")]
    HashMismatch { expected: String, found: String },

    #[error("missing config key `{0}`")]
    MissingKey(String),

    #[error("bad value for config key `{key}`: {value}")]
    BadValue { key: String, value: String },

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
