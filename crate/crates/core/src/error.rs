use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("evaluation point must lie outside the bulk: {0}")]
    OutsideBulkRequired(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateSpectrum(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 for bad input, 3 for numerical
    /// trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::OutsideBulkRequired(_) | Error::Io { .. } => 2,
            Error::NumericalFailure(_) | Error::DegenerateSpectrum(_) => 3,
        }
    }
}
