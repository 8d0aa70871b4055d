//! Crate-wide error type.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Filesystem failure while reading or writing `path`.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// `path` is not a decodable image in a supported format.
    #[error("{path}: cannot decode image: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// Image encoding failed while writing `path`.
    #[error("{path}: cannot encode image: {source}")]
    Encode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// Frames below 3x3 cannot support the 3x3 neighbourhood statistic.
    #[error("frame is {width}x{height}; minimum supported size is 3x3")]
    FrameTooSmall { width: u32, height: u32 },

    /// A pixel buffer does not match its declared dimensions.
    #[error("pixel buffer holds {got} pixels, expected {width}x{height} = {expected}")]
    BufferSize {
        width: u32,
        height: u32,
        expected: usize,
        got: usize,
    },

    /// Two frames that must share dimensions do not.
    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: u32,
        left_height: u32,
        right_width: u32,
        right_height: u32,
    },

    /// A CSV row could not be parsed at all.
    #[error("{path}:{line}: {message}")]
    RecordParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A CSV row parsed but violates a semantic constraint.
    #[error("{path}:{line}: {message}")]
    RecordInvalid {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A blob references a pixel outside the frame it is being measured on.
    #[error("blob pixel ({x},{y}) lies outside the {width}x{height} frame")]
    BlobOutOfFrame {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },

    /// Strict-mode Chi-Square distance hit a near-zero denominator.
    #[error("chi-square distance: degenerate denominator at feature index {index}")]
    DegenerateDenominator { index: usize },

    /// Tracker steps must be fed strictly increasing frame indices.
    #[error("tracker step: frame index {got} is not greater than previous {last}")]
    FrameOrder { got: usize, last: usize },

    /// Configuration text or an override could not be applied.
    #[error("config: {0}")]
    Config(String),

    /// Scene script text failed to parse or validate.
    #[error("scene script: {0}")]
    Script(String),

    /// The request itself is unusable (missing inputs, too few frames, ...).
    #[error("{0}")]
    Usage(String),

    /// A pipeline stage failed on a specific frame.
    #[error("frame {frame_index}, stage {stage}: {source}")]
    Stage {
        frame_index: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the frame index and pipeline stage it occurred in.
    pub fn in_stage(self, frame_index: usize, stage: &'static str) -> Error {
        Error::Stage {
            frame_index,
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by an invalid request rather than by failing
    /// work: callers conventionally map these to usage-style exits.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Script(_) | Error::Usage(_)
        )
    }
}
