use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("simulation diverged at tick {tick}: {reason}")]
    Diverged { tick: u64, reason: String },

    #[error("marker {marker} escaped the interior at ({x:.3}, {y:.3})")]
    MarkerEscape { marker: usize, x: f64, y: f64 },

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("singular linear system ({0})")]
    Singular(&'static str),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("action index {index} out of range (have {count} actions)")]
    ActionOutOfRange { index: usize, count: usize },

    #[error("episode is not active; call reset first")]
    EpisodeInactive,

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
