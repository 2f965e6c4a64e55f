use std::path::PathBuf;

use crate::validate::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("record rejected: {}", Violation::join(.0))]
    Validation(Vec<Violation>),

    #[error("{kind} {code} not found")]
    NotFound { kind: &'static str, code: u64 },

    #[error("{}:{line}: corrupt record: {message}", .path.display())]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: schema_version {found} is newer than supported version {supported}", .path.display())]
    UnsupportedSchema {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("timed out waiting for lock {}", .0.display())]
    LockTimeout(PathBuf),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad selector or predicate: {0}")]
    Selector(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the caller's input rather than the environment
    /// (I/O, locking, on-disk corruption).
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::Corrupt { .. }
                | Error::UnsupportedSchema { .. }
                | Error::LockTimeout(_)
                | Error::Io { .. }
        )
    }
}
