use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension {0} is not a power of two >= 2")]
    BadDimension(usize),

    #[error("{qubits} qubits exceeds the configured cap of {cap}")]
    TooManyQubits { qubits: u32, cap: u32 },

    #[error("source and target must differ (both {0})")]
    SourceEqualsTarget(usize),

    #[error("unresolved operator `{0}`")]
    Unresolved(String),

    #[error("expansion of `{0}` is cyclic")]
    CyclicExpansion(String),

    #[error("dense dimension {0} exceeds the oracle cap of {max}", max = crate::dense::MAX_DENSE_DIM)]
    DenseTooLarge(usize),

    #[error("check requires dimension {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("gate list line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
