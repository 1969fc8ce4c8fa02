use thiserror::Error;

#[derive(Debug, Error)]
pub enum DccnError {
    #[error(transparent)]
    Nn(#[from] cxnn::NnError),
    #[error(transparent)]
    Phy(#[from] ofdm_core::PhyError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("checkpoint does not match: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Config(String),
}

pub type Result<T, E = DccnError> = std::result::Result<T, E>;
