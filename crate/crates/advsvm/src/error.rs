use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors of the std layer. Every variant maps to a process exit code.
#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] advsvm_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {at}: {msg}")]
    Format { path: PathBuf, at: Location, msg: String },
    #[error("config: {0}")]
    Config(String),
}

/// Where in a file a format error was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Byte(u64),
    Line(u64),
    File,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Location::Byte(b) => write!(f, "byte offset {b}"),
            Location::Line(l) => write!(f, "line {l}"),
            Location::File => f.write_str("whole file"),
        }
    }
}

pub type AppResult<T> = std::result::Result<T, AppError>;

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, at: Location, msg: impl Into<String>) -> Self {
        AppError::Format {
            path: path.into(),
            at,
            msg: msg.into(),
        }
    }

    /// 3 for numerical failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}
