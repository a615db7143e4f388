use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared across the library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file {path}: {detail}")]
    MalformedFile { path: String, detail: String },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("sample rate mismatch: expected {expected} Hz, got {got} Hz")]
    RateMismatch { expected: u32, got: u32 },
    #[error("invalid frequency range: {0}")]
    InvalidRange(String),
    #[error("invalid filter parameters: {0}")]
    InvalidParams(String),
    #[error("unstable filter configuration: {0}")]
    Instability(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },
    #[error("silent input: {0} has RMS below 1e-8")]
    SilentInput(String),
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("empty manifest: {0}")]
    EmptyManifest(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {value}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f64 },
    #[error("corrupt checkpoint: {0}")]
    CheckpointCorrupt(String),
    #[error("config error: {0}")]
    Config(String),
}
