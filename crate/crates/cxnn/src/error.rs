use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{context}: expected shape {expected:?}, got {got:?}")]
    Shape {
        context: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("unknown tensor `{0}`")]
    UnknownTensor(String),
    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),
    #[error("{0}")]
    Invalid(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
