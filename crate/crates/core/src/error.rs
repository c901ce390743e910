use thiserror::Error;

/// Errors produced by the signal, model and file-format layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported resampling ratio {fs_in} Hz -> {fs_out} Hz (integer decimation only)")]
    UnsupportedRatio { fs_in: f64, fs_out: f64 },

    #[error("degenerate window: max equals min")]
    DegenerateWindow,

    #[error("infinite SNR: noisy signal equals clean signal")]
    InfiniteSnr,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unsupported kernel size {0} (odd sizes only)")]
    UnsupportedKernel(usize),

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("backward called before a recorded forward pass")]
    State,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("need at least two peaks to estimate heart rate, found {0}")]
    InsufficientPeaks(usize),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported WFDB storage format {0} (only format 16 is read)")]
    UnsupportedFormat(u32),

    #[error("truncated signal file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
