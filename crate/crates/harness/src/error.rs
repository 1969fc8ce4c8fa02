use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Model(#[from] dccn::DccnError),
    #[error(transparent)]
    Nn(#[from] cxnn::NnError),
    #[error(transparent)]
    Phy(#[from] ofdm_core::PhyError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid training plan: {0}")]
    Plan(String),
    #[error("training diverged at episode {episode}, batch {batch} (step {step}): {what}")]
    Diverged {
        episode: usize,
        batch: usize,
        step: u64,
        what: String,
    },
    #[error("{what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("{0}")]
    Usage(String),
}

impl LabError {
    pub fn format(what: &'static str, detail: impl Into<String>) -> Self {
        LabError::Format {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
