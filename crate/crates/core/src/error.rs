use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("anchor index {index} out of range for array of {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("pair ({0}, {0}) references the same anchor")]
    SelfPair(usize),

    #[error("measurement set does not match the likelihood: {0}")]
    MismatchedPairs(String),

    #[error("phase-noise table is empty")]
    EmptyPhaseNoiseTable,

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
