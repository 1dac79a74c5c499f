use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid walk: {0}")]
    InvalidWalk(String),

    #[error("{what} = {value} is outside its domain {range}")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("accumulator grids differ ({0})")]
    GridMismatch(String),

    #[error("{have} samples in {batches} batches are too few for batch-means errors")]
    TooFewSamples { have: u64, batches: usize },

    #[error("unfolding did not terminate after {0} moves")]
    UnfoldStuck(usize),

    #[error("enumeration of length {0} walks is too large (limit {1})")]
    EnumerationTooLarge(usize, usize),

    #[error("checkpoint {path} does not match the configuration: {reason}")]
    CheckpointMismatch { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    PathIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::PathIo { path, source }
    }

    /// True for errors caused by the user's input rather than by the run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse(_)
                | Error::OutOfDomain { .. }
                | Error::CheckpointMismatch { .. }
                | Error::EnumerationTooLarge(..)
                | Error::InvalidWalk(_)
        )
    }
}
