use std::path::PathBuf;

use thiserror::Error;

use crate::data::TurnstileUpdate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label {label} at row {row} is not in {{-1, +1}}")]
    InvalidLabel { row: usize, label: f64 },

    #[error("update {update:?} is out of range for a {n}x{d} matrix")]
    UpdateOutOfRange {
        update: TurnstileUpdate,
        n: usize,
        d: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("non-finite objective value {loss} at iteration {iter} (|x|_inf = {x_norm})")]
    NonFinite { iter: usize, loss: f64, x_norm: f64 },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
