use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation. `keys` holds every offending
    /// config key so the message can point at all of them.
    #[error("invalid config [{}]: {reason}", keys.join(", "))]
    Validation { keys: Vec<String>, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("weighting error: {0}")]
    Weighting(String),

    #[error("infeasible fit: {0}")]
    InfeasibleFit(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(keys: &[&str], reason: impl Into<String>) -> Self {
        Error::Validation {
            keys: keys.iter().map(|k| k.to_string()).collect(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (config, flags) rather than
    /// failures during the computation itself.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation { .. } | Error::Parse(_))
    }
}
