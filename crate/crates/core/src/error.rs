use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the signal/evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty graph")]
    EmptyGraph,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("embedding file is missing {count} node(s), first absent ids: {first:?}")]
    MissingNodes { count: usize, first: Vec<String> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("incomplete result store: {0} missing cell(s), e.g. {1:?}")]
    IncompleteStore(usize, Vec<String>),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
