use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },

    #[error("qubit {qubit} out of range for {n} qubits")]
    QubitOutOfRange { qubit: usize, n: usize },

    #[error("operator is not Hermitian (phase i^{phase})")]
    NonHermitian { phase: u8 },

    #[error("generators do not commute: {0} and {1}")]
    NonCommuting(usize, usize),

    #[error("generator {0} is dependent on earlier generators")]
    Dependent(usize),

    #[error("invalid Clifford tableau: {0}")]
    InvalidClifford(String),

    #[error("invalid circuit specification: {0}")]
    InvalidSpec(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("circuit contains erasure events where a clean circuit is required")]
    NoisyCircuit,

    #[error("noisy and clean circuits do not share the same gate and measurement skeleton")]
    SkeletonMismatch,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("branch budget exceeded: {0}")]
    BudgetExceeded(String),
}

pub type Result<T> = std::result::Result<T, Error>;
