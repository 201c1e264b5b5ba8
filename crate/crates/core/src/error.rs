//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty cluster")]
    EmptyCluster,

    #[error("empty proposal region")]
    EmptyProposalRegion,

    #[error("coincident points")]
    CoincidentPoints,

    #[error("seed index {0} is outside the proposal region")]
    SeedOutsideRegion(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("class index {index} out of range for {num_classes} classes")]
    ClassOutOfRange { index: usize, num_classes: usize },

    #[error("empty probability vector")]
    EmptyProbabilities,

    #[error("no training samples")]
    NoTrainingSamples,

    #[error("velodyne payload truncated: {len} bytes is not a multiple of 16, error at offset {offset}")]
    TruncatedVelodyne { len: usize, offset: usize },

    #[error("missing calibration entry {0}")]
    MissingCalibEntry(String),

    #[error("malformed document{}: {msg}", path.as_deref().map(|p| format!(" {p}")).unwrap_or_default())]
    Format { path: Option<String>, msg: String },

    #[error("invalid scene {scene_id}: {msg}")]
    InvalidScene { scene_id: String, msg: String },

    #[error("object placement infeasible after {retries} retries; lower the object count or shrink the gap")]
    PlacementInfeasible { retries: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format {
            path: None,
            msg: msg.into(),
        }
    }

    /// Attach a file path to a format error for positioned diagnostics.
    pub(crate) fn format_at(path: &std::path::Path, msg: impl std::fmt::Display) -> Self {
        Error::Format {
            path: Some(path.display().to_string()),
            msg: msg.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
