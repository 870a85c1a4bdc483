use alloc::string::String;

/// Errors produced by the tracking core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("probability grid has no mass left")]
    ZeroMass,
    #[error("covariance is not symmetric positive-definite")]
    NonPositiveDefinite,
    #[error("grid shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("position ({x}, {y}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("kernel radius {radius} is below the required {required}")]
    RadiusTooSmall { radius: usize, required: usize },
    #[error("regression samples are degenerate (all center_y equal)")]
    Degenerate,
    #[error("regressed height {height} at y={y} is not positive")]
    NonPositiveHeight { y: f64, height: f64 },
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("frame {frame} out of range (scenario has {frames} frames)")]
    FrameOutOfRange { frame: usize, frames: usize },
    #[error("frame source failed: {0}")]
    Source(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
