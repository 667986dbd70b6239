use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid depth {0} (must be > 0)")]
    InvalidDepth(f64),
    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    OutOfBounds {
        u: f64,
        v: f64,
        width: usize,
        height: usize,
    },
    #[error("direction is parallel to the optical axis")]
    DegenerateDirection,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no valid pixels in frame")]
    EmptyFrame,
    #[error("support region has {found} inlier points, need at least {needed}")]
    TooFewPoints { found: usize, needed: usize },
    #[error("no scene primitive is visible from the camera")]
    EmptyScene,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unsupported image format in {path}: {reason}")]
    UnsupportedBitDepth { path: PathBuf, reason: String },
    #[error("malformed input: {0}")]
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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (files, formats, parameters)
    /// rather than by a pipeline stage.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Image(_)
                | Error::Json(_)
                | Error::Format(_)
                | Error::UnsupportedBitDepth { .. }
                | Error::DimensionMismatch(_)
                | Error::InvalidParam(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
