use thiserror::Error;

pub type Result<T, E = PhyError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhyError {
    #[error("invalid OFDM configuration: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape { expected: Vec<usize>, got: Vec<usize> },
    #[error("unsupported modulation order {0} (expected 1..=4)")]
    UnsupportedModulation(usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("non-binary bit value {value} at index {index}")]
    NonBinary { index: usize, value: u8 },
    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },
    #[error("channel kind `awgn` has no fading realization")]
    NoFading,
    #[error("{0} equalizer needs {1}")]
    MissingContext(&'static str, &'static str),
    #[error("singular linear system in {0}")]
    Singular(&'static str),
}

impl PhyError {
    pub(crate) fn shape(expected: &[usize], got: &[usize]) -> Self {
        PhyError::Shape {
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }
}
