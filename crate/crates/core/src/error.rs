use std::path::PathBuf;

use thiserror::Error;

/// Pipeline stage, used to report where a frame or a lattice detection failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Detect,
    Describe,
    Match,
    Estimate,
    Template,
    FindNeighbors,
    DominantOrientations,
    DetectLattice,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Detect => "detect_mser",
            Stage::Describe => "describe",
            Stage::Match => "match_features",
            Stage::Estimate => "estimate_rigid",
            Stage::Template => "learn_template",
            Stage::FindNeighbors => "find_neighbors",
            Stage::DominantOrientations => "dominant_orientations",
            Stage::DetectLattice => "detect_lattice",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image {path}: {reason}")]
    UnsupportedImage { path: PathBuf, reason: String },
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("coordinate ({x}, {y}) outside image {width}x{height}")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{stage}: {reason}")]
    StageFailure { stage: Stage, reason: String },
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn stage(stage: Stage, reason: impl Into<String>) -> Self {
        Error::StageFailure {
            stage,
            reason: reason.into(),
        }
    }

    pub fn invalid(reason: impl Into<String>) -> Self {
        Error::InvalidArgument(reason.into())
    }

    /// The failing pipeline stage, if this is a stage failure.
    pub fn failed_stage(&self) -> Option<Stage> {
        match self {
            Error::StageFailure { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
