use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image is {width}x{height}, detection needs at least {min}x{min} pixels")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid synthetic image spec: {0}")]
    InvalidSpec(String),

    #[error("direction index {index} out of range 1..={count}")]
    DirectionOutOfRange { index: usize, count: usize },

    #[error("both sample variances are zero")]
    ZeroVariance,

    #[error("malformed result file: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's parameters rather than by the
    /// input data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::DirectionOutOfRange { .. }
        )
    }
}
