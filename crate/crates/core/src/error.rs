//! Crate-wide error type.
//!
//! Every contract error carries the name of the module that raised it so a
//! failure surfacing at the CLI can be traced back without a backtrace.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}: dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        module: &'static str,
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{module}: contract violation: {msg}")]
    Contract { module: &'static str, msg: String },

    #[error("{module}: unsupported: {msg}")]
    Unsupported { module: &'static str, msg: String },

    #[error("{module}: invalid input: {msg}")]
    Invalid { module: &'static str, msg: String },

    #[error("{module}: training diverged: {msg}")]
    Diverged { module: &'static str, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn contract(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Contract {
            module,
            msg: msg.into(),
        }
    }

    pub fn unsupported(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Unsupported {
            module,
            msg: msg.into(),
        }
    }

    pub fn invalid(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid {
            module,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

/// Returns a dimension error unless `got == expected`.
pub(crate) fn check_dim(
    module: &'static str,
    what: &'static str,
    expected: usize,
    got: usize,
) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            module,
            what,
            expected,
            got,
        })
    }
}
