use std::path::PathBuf;

use deepstreet_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("geometry mismatch: {0}")]
    Geometry(String),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("disjoint sampling can place at most {max} tiles, {requested} requested")]
    CapacityExhausted { requested: usize, max: usize },
    #[error("checkpoint does not match the network: {0}")]
    CheckpointMismatch(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("non-finite {what} at {phase} iteration {iteration}; last good checkpoint: {last_checkpoint:?}")]
    Diverged {
        what: &'static str,
        phase: &'static str,
        iteration: usize,
        last_checkpoint: Option<PathBuf>,
    },
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Parse { location: location.into(), message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
