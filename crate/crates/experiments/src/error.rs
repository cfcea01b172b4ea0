use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error(transparent)]
    Core(#[from] uwbloc_core::Error),
    #[error(transparent)]
    Mac(#[from] uwbloc_mac::MacError),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ExpError>;

impl From<toml::de::Error> for ExpError {
    fn from(e: toml::de::Error) -> Self {
        ExpError::Config(e.to_string())
    }
}
