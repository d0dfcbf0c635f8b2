use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed binary file. `offset` is the byte position where decoding failed.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    /// A value or structure violates a documented precondition.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Signal too short, constant, or otherwise unusable for the requested estimate.
    #[error("signal error: {0}")]
    Signal(String),

    /// Tensor shape mismatch inside a model.
    #[error("shape mismatch at layer {layer}: {reason}")]
    Shape { layer: usize, reason: String },

    /// NaN or infinity produced by a computation.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Training loss became NaN.
    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
