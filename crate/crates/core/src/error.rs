use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::stats::StatsError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field geometry: {0}")]
    InvalidField(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot place {n} robots without overlap ({attempts} attempts)")]
    Placement { n: usize, attempts: usize },

    #[error("malformed {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("incomplete sweep: {0}")]
    Incomplete(String),

    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 configuration, 2 I/O, 3 partial sweep.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Incomplete(_) => 3,
            _ => 1,
        }
    }
}
