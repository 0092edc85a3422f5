use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid band [{low_hz}, {high_hz}] Hz at sample rate {sample_rate_hz} Hz")]
    InvalidBand {
        low_hz: f64,
        high_hz: f64,
        sample_rate_hz: f64,
    },

    #[error("filter design is unstable (pole magnitude {max_pole_magnitude})")]
    UnstableDesign { max_pole_magnitude: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("window of {window_ms} ms exceeds epoch duration of {duration_ms} ms")]
    WindowTooLong { window_ms: f64, duration_ms: f64 },

    #[error("empty segment")]
    EmptySegment,

    #[error("trial {0} has no EMG epoch")]
    MissingEmg(String),

    #[error("expected {expected} channels, found {found}")]
    ChannelCountMismatch { expected: usize, found: usize },

    #[error("trial {0} has no class label")]
    UnlabeledTrial(String),

    #[error("empty input")]
    EmptyInput,

    #[error("segment has zero total power")]
    DegenerateSegment,

    #[error("composite covariance is numerically singular")]
    SingularComposite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("training labels contain a single class")]
    SingleClassInput,

    #[error("pooled covariance is singular")]
    SingularCovariance,

    #[error("pattern library is empty")]
    EmptyLibrary,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),

    #[error("format error in {}{}: {message}", path.display(), location.map(|l| format!(" (line/offset {l})")).unwrap_or_default())]
    Format {
        path: PathBuf,
        location: Option<usize>,
        message: String,
    },

    #[error("checksum mismatch in {}: stored {stored:#010x}, computed {computed:#010x}", path.display())]
    ChecksumMismatch {
        path: PathBuf,
        stored: u32,
        computed: u32,
    },

    #[error("unsupported format version {found} (this build reads up to {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, location: Option<usize>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            location,
            message: message.into(),
        }
    }

    /// True for errors raised by a numerical routine rather than by bad input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::UnstableDesign { .. }
                | Error::SingularComposite
                | Error::SingularCovariance
                | Error::DegenerateSegment
                | Error::SingleClassInput
        )
    }
}
