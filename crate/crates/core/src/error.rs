use std::path::PathBuf;

use crate::channel::InterferenceScenario;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: String, reason: String },

    #[error("invalid interference scenario {scenario}: {reason}")]
    InvalidScenario {
        scenario: InterferenceScenario,
        reason: String,
    },

    #[error("success table has no entry for {0}")]
    MissingScenario(InterferenceScenario),

    #[error("relay queue is not stable (mean drift {drift:+.6e} >= 0)")]
    Unstable { drift: f64 },

    #[error("transition kernel closure is negative ({0:e})")]
    NegativeClosure(f64),

    #[error("stationary solver did not converge within {0} states")]
    NotConverged(usize),

    #[error("exact enumeration supports at most {max} UEs, got {n}")]
    EnumerationTooLarge { n: u32, max: u32 },

    #[error("malformed table cache {path}: {reason}")]
    TableFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
