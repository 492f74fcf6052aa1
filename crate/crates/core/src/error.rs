use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("duplicate document ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),

    #[error("document `{id}` has language `{lang}`, expected one of {expected:?}")]
    UnknownLanguage {
        id: String,
        lang: String,
        expected: [String; 2],
    },

    #[error("unknown document id `{0}`")]
    UnknownId(String),

    #[error("gold set: {0}")]
    Gold(String),

    #[error("document `{0}` has neither title nor lead and cannot be aligned")]
    EmptyAlignmentText(String),

    #[error("embedding provider returned status {status}: {body}")]
    Provider { status: u16, body: String },

    #[error("embedding transport: {0}")]
    Transport(String),

    #[error("embedding integrity: {0}")]
    Integrity(String),

    #[error("cannot normalize zero vector for text index {index}")]
    ZeroVector { index: usize },

    #[error("no vector for id `{0}`")]
    MissingVector(String),

    #[error("vector file format: {0}")]
    Format(String),

    #[error("vector file truncated: {0}")]
    Length(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
