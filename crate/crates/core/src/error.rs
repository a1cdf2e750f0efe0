use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:?})")]
    NotConverged {
        iterations: usize,
        residual: Option<f64>,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error("step {step} ({stage}): {source}")]
    Stage {
        step: u8,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse failure class, used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
    Config,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::DuplicateId(_)
            | Error::InvalidInput(_)
            | Error::DimensionMismatch { .. } => ErrorKind::Input,
            Error::Degenerate(_) | Error::NotConverged { .. } => ErrorKind::Numerical,
            Error::Config(_) => ErrorKind::Config,
            Error::Stage { source, .. } => source.kind(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_step(self, step: u8, stage: &'static str) -> Self {
        Error::Stage {
            step,
            stage,
            source: Box::new(self),
        }
    }
}
