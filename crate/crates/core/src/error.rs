//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("conflicting runtimes for key {key}: stored {stored}, incoming {incoming}")]
    Conflict {
        key: String,
        stored: f64,
        incoming: f64,
    },

    #[error("store is empty")]
    EmptyStore,

    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },

    #[error("missing embedding for {0}")]
    MissingEmbedding(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("embedding provider error (status {status:?}): {message}")]
    Provider { status: Option<u16>, message: String },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("did not converge after {epochs} epochs (last loss {last_loss})")]
    NoConvergence { epochs: usize, last_loss: f64 },

    #[error("no method fits the budget {budget}; cheapest is {cheapest_method} at {cheapest_cost}")]
    Infeasible {
        budget: f64,
        cheapest_cost: f64,
        cheapest_method: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
