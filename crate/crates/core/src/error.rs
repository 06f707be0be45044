use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one of the stable
/// failure categories the command-line tool reports through its exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented range or consistency rule.
    #[error("validation error: {0}")]
    Validation(String),

    /// A file does not match its declared layout.
    #[error("format error: {0}")]
    Format(String),

    /// The requested computation exceeds a hard size guard.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A numeric routine produced a non-finite result.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The caller broke an operation's precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        // Bound first so NaN comparisons read as failures without a lint.
        let holds: bool = $cond;
        if !holds {
            return Err($crate::error::Error::$variant(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
