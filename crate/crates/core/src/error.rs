use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("symbol {0} is outside 0..4")]
    SymbolOutOfRange(u32),

    #[error("initial state id {0} is outside 0..16")]
    InitialStateOutOfRange(u32),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("state vector has zero norm")]
    ZeroVector,

    #[error("state vector is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("non-finite amplitude")]
    NonFinite,

    #[error("measurement branch has zero probability")]
    ZeroProbabilityBranch,

    #[error("slot {0} already carries an entangled ancilla")]
    AlreadyProbed(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid message encoding: {0}")]
    Message(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
