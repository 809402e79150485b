// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in layer {layer}")]
    NonFiniteValue { layer: usize },

    #[error("empty vector")]
    EmptyVector,

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Mutation(#[from] crate::mutation::MutationError),

    #[error(transparent)]
    Pool(#[from] crate::pool::PoolError),

    #[error("adapter not found: {0}")]
    AdapterNotFound(String),

    #[error("invalid fault config: {0}")]
    InvalidFaultConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
