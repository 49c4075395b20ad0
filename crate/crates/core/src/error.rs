use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate camera frame: {0}")]
    DegenerateFrame(&'static str),
    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("silhouette has no foreground pixel")]
    EmptyForeground,
    #[error("silhouette has no background pixel")]
    EmptyBackground,
    #[error("inconsistent view {index}: {reason}")]
    InconsistentView { index: usize, reason: String },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("point cloud bounding box is degenerate")]
    DegenerateCloud,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("voxel grids differ in resolution or bounds")]
    GridMismatch,
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("no mesh triangle covers any pixel center")]
    NothingVisible,
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("non-finite loss at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
