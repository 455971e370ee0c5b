use std::io;
use std::path::{Path, PathBuf};

use mglc_core::fewshot::TrainError;

/// Everything the CLI can fail with, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    /// 1 usage, 2 data (including unreadable files), 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Io { .. } | Error::Data(_) => 2,
            Error::Numeric(_) => 3,
        }
    }
}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        if e.is_numeric() {
            Error::Numeric(e.to_string())
        } else {
            Error::Data(e.to_string())
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
