use std::path::PathBuf;

/// Errors produced anywhere in the spotting pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("image has fewer than two ink columns")]
    InsufficientInk,

    #[error("image has no pixels or no ink")]
    EmptyImage,

    #[error("expected a {expected} image")]
    WrongDepth { expected: &'static str },

    #[error("sequence of {frames} frames is shorter than the network minimum of {min}")]
    TooShort { frames: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("symbol {0:?} is not in the model vocabulary")]
    OutOfVocabulary(String),

    #[error("grapheme {0:?} has no zone mapping rule")]
    UnmappedGrapheme(String),

    #[error("keyword {0:?} has an empty middle-zone form")]
    EmptyMiddleForm(String),

    #[error("band radius {radius} cannot connect sequences of length {len_a} and {len_b}")]
    BandTooNarrow { radius: usize, len_a: usize, len_b: usize },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("{0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("malformed {what} data: {msg}")]
    Format { what: &'static str, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }

    pub(crate) fn format(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Format { what, msg: msg.into() }
    }
}
