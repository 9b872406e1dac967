use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("{what}: {n} qubits exceeds the supported limit of {limit}")]
    Scale {
        what: &'static str,
        n: usize,
        limit: usize,
    },

    #[error("qubit index {index} out of range for a {n}-qubit register")]
    QubitIndex { index: usize, n: usize },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("spectral norm {0} exceeds 1")]
    Norm(f64),

    #[error("denominator omega = {0:e} is not safely positive")]
    UnstableDenominator(f64),

    #[error("no feasible shift in bracket: {0}")]
    Bracket(String),

    #[error("evaluation budget of {0} exhausted")]
    BudgetExhausted(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
