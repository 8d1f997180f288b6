use std::path::PathBuf;

use thiserror::Error;

use crate::time::TimePoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("exponential mean must be positive")]
    ZeroMean,

    #[error("duration `{field}` must be positive")]
    NonPositiveDuration { field: &'static str },

    #[error("no idle channel found between {from} and the horizon at {horizon}")]
    HorizonExhausted { from: TimePoint, horizon: TimePoint },

    #[error("{path}: {message}")]
    InvalidConfig { path: String, message: String },

    #[error("unknown interference preset `{0}`")]
    UnknownPreset(String),

    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),

    #[error("classification needs at least two verdicts, got {0}")]
    TooFewVerdicts(usize),

    #[error("bit-vector schedule needs 1 <= r <= k <= 64, got r={receivers} k={slots}")]
    InvalidSchedule { receivers: usize, slots: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Prefixes the field path of a config error, e.g. `t_jam` becomes
    /// `protocols[2].t_jam`. Other errors pass through.
    pub(crate) fn under(self, prefix: &str) -> Self {
        match self {
            Error::InvalidConfig { path, message } => Error::InvalidConfig {
                path: format!("{prefix}.{path}"),
                message,
            },
            other => other,
        }
    }
}
