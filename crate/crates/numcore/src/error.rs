use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: expected shape {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },
    #[error("cosine similarity undefined for zero-norm vector")]
    ZeroNorm,
    #[error("backward already called on this tape; build a new forward graph first")]
    BackwardConsumed,
    #[error("non-finite gradient for parameter `{param}`")]
    NonFiniteGradient { param: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
