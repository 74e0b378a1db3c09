use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum QnnError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("qubit {qubit} out of range for a {num_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("expected {expected} parameters, found {found}")]
    ParamCount { expected: usize, found: usize },

    #[error("shot count must be at least 1")]
    ZeroShots,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("ambiguous label: |<H>| = {0:e} is below the tie tolerance")]
    AmbiguousLabel(f64),

    #[error("unknown layer kind `{0}`")]
    UnknownLayer(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed IDX file: {0}")]
    Idx(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = QnnError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> QnnError {
    QnnError::InvalidInput(msg.into())
}
