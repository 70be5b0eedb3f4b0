use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("signal too short: {len} samples (need at least {min})")]
    SignalTooShort { len: usize, min: usize },
    #[error("insufficient biomarker history: {have} samples (need {need})")]
    InsufficientHistory { have: usize, need: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("calibration gate failed: {0}")]
    Calibration(String),
    #[error("empty metrics: {0}")]
    EmptyMetrics(&'static str),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("plot: {0}")]
    Plot(String),
}

impl Error {
    /// Stable short name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Dimension { .. } => "dimension",
            Error::SignalTooShort { .. } => "signal_too_short",
            Error::InsufficientHistory { .. } => "insufficient_history",
            Error::NonFinite(_) => "non_finite",
            Error::Checkpoint(_) => "checkpoint",
            Error::Calibration(_) => "calibration",
            Error::EmptyMetrics(_) => "empty_metrics",
            Error::Io { .. } => "io",
            Error::Plot(_) => "plot",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
