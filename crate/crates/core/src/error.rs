use std::io;

/// Errors raised by the learners, samplers and the privacy calculus.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model has no edges")]
    NoEdges,

    #[error("state space of {states} configurations exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: u64 },

    #[error("privacy budget exceeded: requested {requested}, remaining {remaining}")]
    BudgetExceeded { requested: f64, remaining: f64 },

    #[error("{count} monomial features exceed the cap of {cap}")]
    TooManyFeatures { count: usize, cap: usize },

    #[error("insufficient data: {rows} rows cannot fill {blocks} blocks")]
    InsufficientData { rows: usize, blocks: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
