use thiserror::Error;

use crate::evaluation::EvalError;
use crate::ingest::IngestError;
use crate::policies::PolicyError;
use crate::scoring::ScoreError;
use crate::selection::SelectionError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by the analysis pipeline and the evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no comments")]
    NoComments,
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Format(String),
}

/// Broad classification used for process exit codes and HTTP status mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Scorer,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Policy(_) => ErrorClass::Usage,
            Error::Score(e) => e.class(),
            Error::Selection(SelectionError::Score(e)) => e.class(),
            Error::Ingest(IngestError::Score(e)) => e.class(),
            Error::Ingest(IngestError::Config(_)) => ErrorClass::Usage,
            Error::Eval(EvalError::Score(e)) => e.class(),
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
