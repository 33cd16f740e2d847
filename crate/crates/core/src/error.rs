use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the tomography pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unphysical dB levels: antisqueezing {antisqueezing_db} dB is below squeezing {squeezing_db} dB")]
    Unphysical {
        squeezing_db: f64,
        antisqueezing_db: f64,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("corrupt data: {0}")]
    Corrupt(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown architecture {0:?}")]
    UnknownArch(String),

    #[error("unknown phase schedule {0}")]
    UnknownSchedule(u8),

    #[error("missing calibration statistics for tensor {0}")]
    MissingStats(usize),

    #[error("quantization: {0}")]
    Quantization(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// Short stable identifier used for machine-parsable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParam(_) => "invalid_param",
            Error::Unphysical { .. } => "unphysical",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::BadMagic { .. } => "bad_magic",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::Truncated(_) => "truncated",
            Error::Checksum { .. } => "checksum",
            Error::Corrupt(_) => "corrupt",
            Error::Io { .. } => "io",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::NonFinite(_) => "non_finite",
            Error::Empty(_) => "empty",
            Error::UnknownArch(_) => "unknown_arch",
            Error::UnknownSchedule(_) => "unknown_schedule",
            Error::MissingStats(_) => "missing_stats",
            Error::Quantization(_) => "quantization",
            Error::Config(_) => "config",
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
