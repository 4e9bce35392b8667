use std::path::PathBuf;

use tagan_autodiff::AutodiffError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("audio signal is empty")]
    EmptySignal,
    #[error("no training data")]
    NoData,
    #[error("utterance has {frames} frames, need at least {needed}")]
    TooShort { frames: usize, needed: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty label track")]
    EmptyTrack,
    #[error("reference track lacks {0} frames; detection cost is undefined")]
    DegenerateReference(&'static str),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("non-finite loss in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: segment overlaps the previous one")]
    Overlap { path: PathBuf, line: usize },
    #[error("split ratios must be nonnegative and sum to 1, got {0:?}")]
    BadRatios(Vec<f64>),
    #[error("unknown ablation variant {0:?}")]
    UnknownVariant(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("cannot access {path}")]
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

    /// True for failures caused by diverging optimisation rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFiniteLoss { .. })
    }
}
