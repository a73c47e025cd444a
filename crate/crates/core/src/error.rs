use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("non-finite value at example {index}: {what}")]
    Divergence { index: usize, what: String },

    #[error("accounting failed: {0}")]
    Accounting(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("privacy budget exhausted before the first step (delta {delta:e} > {delta0:e})")]
    BudgetExhausted { delta: f64, delta0: f64 },

    #[error("config error in `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("malformed data at byte offset {offset}: {msg}")]
    Format { offset: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
