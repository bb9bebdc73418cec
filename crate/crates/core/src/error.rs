use thiserror::Error;

/// Errors surfaced by the quantization, rotation, GEMM, and trainer layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input in {0}")]
    NonFinite(&'static str),
    #[error("empty block")]
    EmptyBlock,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unsupported Hadamard size {0}, expected 16 or 32")]
    UnsupportedHadamardSize(usize),
    #[error("axis length {len} is not a multiple of Hadamard size {size}")]
    AxisNotDivisible { len: usize, size: usize },
    #[error("E8M0 NaN-sentinel scale encountered")]
    NanScale,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("malformed tensor bytes: {0}")]
    MalformedBytes(String),
}

pub type Result<T> = std::result::Result<T, Error>;
