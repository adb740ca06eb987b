use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid note at index {index}: {reason}")]
    InvalidNote { index: usize, reason: String },

    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("midi parse error at byte offset {offset}: {message}")]
    Midi { offset: usize, message: String },

    #[error("profile field `{field}`: {message}")]
    Profile { field: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("decode error at token {index}: {message}")]
    Decode { index: usize, message: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

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
