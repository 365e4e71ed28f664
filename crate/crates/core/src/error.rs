use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors shared by every module in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("side length must be at least {min}")]
    BadSideLength { min: usize },
    #[error("channel count must be at least 1")]
    NoChannels,
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("value {value} at index {index} is outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error("elevation {theta} rad is outside [-pi/2, pi/2]")]
    ElevationOutOfRange { theta: f64 },
    #[error("azimuth {phi} rad is outside [0, 2*pi)")]
    AzimuthOutOfRange { phi: f64 },
    #[error("{context}: shapes do not match")]
    ShapeMismatch { context: &'static str },
    #[error("expected a single-channel grid, got {channels} channels")]
    MultiChannel { channels: usize },
    #[error("{what} must not be empty")]
    Empty { what: &'static str },
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: &'static str },
    #[error("item length {len} is not a cube")]
    NotCubic { len: usize },
    #[error("view index {index} out of range for {n_views} views")]
    ViewIndexOutOfRange { index: usize, n_views: usize },
    #[error("vertex index {index} out of range ({vertices} vertices)")]
    VertexIndexOutOfRange { index: usize, vertices: usize },
}
