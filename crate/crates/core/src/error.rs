use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::VerseRef;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid UTF-8 at line {line}")]
    Encoding { line: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate verse reference {reference}")]
    DuplicateRef { line: usize, reference: VerseRef },

    #[error("line {line}: verse reference {reference} follows {previous}; input must be sorted")]
    OutOfOrder {
        line: usize,
        reference: VerseRef,
        previous: VerseRef,
    },

    #[error("invalid corpus structure: {0}")]
    Structure(String),

    #[error("chapter {chapter} not found in translation {translation}")]
    ChapterNotFound { translation: String, chapter: u32 },

    #[error("{0}")]
    Domain(String),

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("record {record}: {message}")]
    Validation { record: usize, message: String },

    #[error("{0}")]
    Invalid(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data rather than by the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
