use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a mathematical function or distribution.
    #[error("{func}: argument out of domain ({detail})")]
    Domain { func: &'static str, detail: String },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Every component assigns zero weight to an observed word.
    #[error("degenerate document: word {word} has zero weight under every component")]
    Degenerate { word: usize },

    #[error("word ids not in vocabulary: {ids:?}")]
    OutOfVocabulary { ids: Vec<usize> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),

    /// Internal bookkeeping no longer matches a recount.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("model file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by the numerical state of a run rather than its inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::Degenerate { .. } | Error::Invariant(_)
        )
    }
}
