use thiserror::Error;

/// Errors produced by the simulation toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} qubits, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },

    #[error("duplicate qubit index {0}")]
    DuplicateQubit(usize),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid family spec: {0}")]
    InvalidFamily(String),

    #[error("defect order {k} exceeds the edge count {edges}")]
    DefectOrder { k: usize, edges: usize },

    #[error("outcome {sign:+} on qubit {qubit} is impossible: the measurement is deterministic")]
    ImpossibleOutcome { qubit: usize, sign: i8 },

    #[error("outcomes violate the embedded parity checks of the ideal graph")]
    Rejected,

    #[error("{n} qubits exceed the statevector cap of {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("branch count 2^{0} exceeds the enumeration limit")]
    TooManyBranches(usize),

    #[error("no accepted samples: the estimate is empty")]
    EmptyEstimate,
}

pub type Result<T> = std::result::Result<T, Error>;
