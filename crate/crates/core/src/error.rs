use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{0}")]
    IoStream(#[from] io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("token not in vocabulary: {0:?}")]
    OutOfVocabulary(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("scoring error: {0}")]
    Scoring(String),

    #[error("missing frequency data: {0}")]
    MissingFrequencies(String),

    #[error("base pair derivation error: {0}")]
    Derivation(String),

    #[error("regression error: {0}")]
    Regression(String),

    #[error("timeline error: {0}")]
    Timeline(String),

    #[error("plot error: {0}")]
    Plot(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
