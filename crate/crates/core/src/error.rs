use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension {requested} exceeds the supported maximum of {max}")]
    DimensionTooLarge { requested: usize, max: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("head fit failed: {0}")]
    Fit(String),

    #[error("backward called without a recorded forward pass")]
    NoForwardPass,

    #[error("non-finite loss in epoch {epoch}, batch {batch} (l_dist={l_dist}, l_disc={l_disc})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        l_dist: f64,
        l_disc: f64,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
