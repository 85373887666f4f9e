use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("clip too short: {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },

    #[error("invalid frame spec: {0}")]
    InvalidFrameSpec(String),

    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),

    #[error("degenerate segment {index}: {reason}")]
    DegenerateSegment { index: usize, reason: String },

    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite observation at frame {frame}")]
    NonFinite { frame: usize },

    #[error("fusion weight {0} outside [0, 1]")]
    InvalidWeight(f64),

    #[error("suprasegmental layer missing: {0}")]
    MissingSuprasegmental(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("unknown system {0:?}")]
    UnknownSystem(String),

    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format { context: context.into(), message: message.into() }
    }
}
