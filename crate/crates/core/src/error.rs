use std::io;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("parse error{}: {message}", match .layer { Some(i) => format!(" in layer {i}"), None => String::new() })]
    Parse { layer: Option<usize>, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient sample size: given {given}, needed at least {needed}")]
    InsufficientSample { given: usize, needed: usize },

    #[error("degenerate sample: variance is zero")]
    DegenerateSample,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(layer: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse { layer, message: message.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
