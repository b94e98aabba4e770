use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("document {document}, sentence {sentence}: {message}")]
    Sentence {
        document: String,
        sentence: usize,
        message: String,
    },

    #[error("corpus: {0}")]
    Corpus(String),

    #[error("cannot stratify: language {0} has fewer than 2 documents")]
    Stratify(String),

    #[error("WALS row {row}: {message}")]
    Wals { row: usize, message: String },

    #[error("no shared documented features between {0} and {1}")]
    EmptyIntersection(String, String),

    #[error("clustering: {0}")]
    Cluster(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("empty comparison set")]
    EmptyComparison,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// I/O and serialization failures, as opposed to domain errors.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
