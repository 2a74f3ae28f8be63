use thiserror::Error;

/// Errors raised across the simulator, protocol and learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {requested} qubits requested, maximum is {max}")]
    Capacity { requested: usize, max: usize },

    #[error("invalid qubit index {index} for a {num_qubits}-qubit state")]
    QubitIndex { index: usize, num_qubits: usize },

    #[error("gate targets must be distinct: {0:?}")]
    DuplicateTargets(Vec<usize>),

    #[error("amplitudes are not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("register is not in the ground state")]
    RegisterNotGround,

    #[error("qubit {0} is not in a computational basis state")]
    NotMeasured(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dataset error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
