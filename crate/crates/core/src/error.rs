use thiserror::Error;

/// Errors raised by samplers, operators and the verification machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inputs are individually valid but mutually inconsistent (e.g. masses not summing to one).
    #[error("consistency error: {0}")]
    Consistency(String),
    /// A combinatorial guard was exceeded.
    #[error("size error: {0}")]
    Size(String),
    /// A numerical routine failed to converge or the result is not representable.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// The requested parameters are valid but the method does not support them.
    #[error("unsupported parameters: {0}")]
    Unsupported(String),
    /// A test was called in a way its assumptions do not cover.
    #[error("usage error: {0}")]
    Usage(String),
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
