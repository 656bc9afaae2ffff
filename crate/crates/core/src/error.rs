//! Crate-wide error type.

/// Errors produced by any of the simulator's modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("missing labels: {0}")]
    MissingLabels(String),

    #[error("fixed-point overflow: |{value}| exceeds the clamp range [-2^{clamp_bits}, 2^{clamp_bits})")]
    FixedPointOverflow { value: f64, clamp_bits: u32 },

    #[error("encryption error: {0}")]
    Crypto(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("format error in {path}: {msg}")]
    Format { path: String, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
