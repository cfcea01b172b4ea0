use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MacError {
    #[error("invalid MAC configuration: {0}")]
    Config(String),
    #[error("slot table full; tag {0} not onboarded")]
    TableFull(u32),
}

pub type Result<T> = std::result::Result<T, MacError>;
