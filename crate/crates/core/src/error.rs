use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-facing parameter (distribution, lattice size, trial count, ...).
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Internal data does not reference what it claims to (unknown edge, broken path).
    #[error("integrity error: {0}")]
    Integrity(String),
    /// A precondition of an operation was not met by the caller.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("matching instance has no perfect matching")]
    Infeasible,
    #[error("instance too large for exhaustive search: {n} nodes (max {max})")]
    Size { n: usize, max: usize },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input rather than a failure at run time.
    pub fn is_configuration(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Domain(_))
    }
}
