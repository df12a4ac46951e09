use std::path::PathBuf;

use crate::corpus::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while building, loading or writing corpus artifacts.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid label {name:?}: {reason}")]
    InvalidLabel { name: String, reason: &'static str },

    #[error("duplicate label {0:?} in label set")]
    DuplicateLabel(String),

    #[error("label set must not be empty")]
    EmptyLabelSet,

    #[error("invalid span [{start}, {end}): start must be < end")]
    InvalidSpan { start: usize, end: usize },

    #[error("duplicate sentence id {0:?}")]
    DuplicateId(String),

    #[error("sentence {id:?} is invalid: {}", join_violations(.violations))]
    InvalidSentence { id: String, violations: Vec<Violation> },

    #[error("{path}:{line}: {message}")]
    Schema {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot encode sentence {id:?}: text contains {ch:?} at character {position}")]
    Unencodable { id: String, ch: char, position: usize },

    #[error("prompt needs at least one example")]
    EmptyPrompt,

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Sampling(#[from] crate::sampling::SamplingError),

    #[error(transparent)]
    Eval(#[from] crate::eval::EvalError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
