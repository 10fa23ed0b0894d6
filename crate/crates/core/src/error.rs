use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit state")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("gate acts on qubit {0} more than once")]
    DuplicateQubit(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("vector is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("angle {0} outside [0, pi/2]")]
    AngleOutOfRange(f64),

    #[error("duplicate basis index {0} within one data item")]
    DuplicateBasisIndex(usize),

    #[error("target has mixed-sign amplitudes; only sign-uniform targets are supported")]
    MixedSignTarget,

    #[error("degenerate overlap {0}: amplification needs 0 < overlap < 1")]
    DegenerateOverlap(f64),

    #[error("basis state {0} is not a target state")]
    NotATarget(usize),

    #[error("empty report")]
    EmptyReport,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset error at line {line}: {msg}")]
    Dataset { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
