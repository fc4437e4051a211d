use thiserror::Error;

pub type Result<T> = std::result::Result<T, GameError>;

#[derive(Debug, Error)]
pub enum GameError {
    /// A precondition on an input value or shape was violated.
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    /// A row of the matrix belongs to no category.
    #[error("cover violation: row {row} belongs to no category")]
    CoverViolation { row: usize },

    #[error("unknown category `{0}`")]
    UnknownCategory(String),

    /// The iteration produced a non-finite value.
    #[error("solver diverged: non-finite iterate at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("SVD failed to converge")]
    SvdFailure,

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl GameError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        GameError::Validation(msg.into())
    }

    pub(crate) fn shape(expected: impl Into<String>, actual: impl Into<String>) -> Self {
        GameError::Shape {
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    /// True for errors caused by numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, GameError::Divergence { .. } | GameError::SvdFailure)
    }
}
