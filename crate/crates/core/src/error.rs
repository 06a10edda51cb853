use thiserror::Error;

use crate::lp::LpStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("size cap exceeded: {0}")]
    CapExceeded(String),

    #[error("linear program ended with status {status:?}: {context}")]
    Lp { status: LpStatus, context: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("cut generation hit the round limit ({rounds} rounds)")]
    RoundLimit { rounds: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn lp(status: LpStatus, context: impl Into<String>) -> Self {
        Error::Lp {
            status,
            context: context.into(),
        }
    }
}
