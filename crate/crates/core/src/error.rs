use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A tensor or parameter had the wrong extent along a named dimension.
    #[error("shape mismatch in {dim}: expected {expected}, got {actual}")]
    Shape {
        dim: String,
        expected: usize,
        actual: usize,
    },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("operation would produce an empty output: {0}")]
    EmptyOutput(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn shape(dim: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Shape {
            dim: dim.into(),
            expected,
            actual,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
