use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MvfifError {
    #[error("signal has no channels or no samples")]
    EmptySignal,
    #[error("channel {channel} has {found} samples, expected {expected}")]
    RaggedChannels {
        channel: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in channel {channel} at sample {index}")]
    NonFinite { channel: usize, index: usize },
    #[error("signal has {found} samples, at least {required} are required")]
    TooShort { found: usize, required: usize },
    #[error("extension of {ext_len} samples exceeds signal length {m}")]
    ExtensionTooLong { ext_len: usize, m: usize },
    #[error("sample rate must be positive and finite")]
    InvalidSampleRate,
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("signal with {m} samples is too short to measure rotation")]
    SignalTooShort { m: usize },
    #[error("series has fewer than two interior extrema")]
    NoExtrema,
    #[error("invalid filter length {0}")]
    InvalidLength(usize),
    #[error("kernel support 2*{l}+1 exceeds signal length {m}")]
    KernelTooWide { l: usize, m: usize },
    #[error("imaginary residue {residue:e} above tolerance {tolerance:e}")]
    ComplexResidue { residue: f64, tolerance: f64 },
    #[error("dense oracle limited to {limit} samples, got {m}")]
    TooLarge { m: usize, limit: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("fewer than two non-constant IMFs")]
    DegenerateImf,
    #[error("noise has zero energy")]
    ZeroNoise,
    #[error("missing decomposition: {0}")]
    MissingDecomposition(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MvfifError {
    fn from(e: std::io::Error) -> Self {
        MvfifError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for MvfifError {
    fn from(e: serde_json::Error) -> Self {
        MvfifError::ParseError {
            line: e.line(),
            message: e.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, MvfifError>;
