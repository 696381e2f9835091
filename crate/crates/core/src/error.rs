use thiserror::Error;

use crate::network::SimTime;
use crate::types::{Height, ProcessId};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("expected block at height {expected}, found {found}")]
    NonContiguous { expected: Height, found: Height },
    #[error("parent link of block {height} does not match the previous block")]
    BrokenLink { height: Height },
    #[error("trace has no genesis line")]
    MissingGenesis,
    #[error("genesis line must come first (line {line})")]
    MisplacedGenesis { line: usize },
    #[error("trace line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueueError {
    #[error("event at {at} is earlier than the clock ({now})")]
    InvalidTimestamp { at: SimTime, now: SimTime },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("height {height} has {faulty} non-correct committee members, more than the bound {bound}")]
    QuorumImpossible {
        height: Height,
        faulty: usize,
        bound: usize,
    },
    #[error("agreement violated at height {height}: {first:#x} vs {second:#x} (from {process})")]
    AgreementViolated {
        height: Height,
        first: u64,
        second: u64,
        process: ProcessId,
    },
    #[error("decided payload {payload:#x} at height {height} was never proposed")]
    UnknownPayload { height: Height, payload: u64 },
    #[error("simulation stalled at t={at} after {events} events (heights reached: {detail})")]
    Stalled {
        at: SimTime,
        events: u64,
        detail: String,
    },
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FairnessError {
    #[error("rewards for height {height} have not been allocated yet")]
    RewardsNotYetAllocated { height: Height },
    #[error("trace of {available} heights is shorter than the required window {window}")]
    InsufficientTrace { available: u64, window: u64 },
}

/// A scenario field that failed validation, with its JSON path.
#[derive(Debug, Error, Clone, PartialEq, Eq, serde::Serialize)]
#[error("{field}: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Validation(#[from] ValidationError),
    #[error("scenario parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unknown figure `{0}`")]
    UnknownFigure(String),
    #[error("unknown built-in scenario `{0}`")]
    UnknownScenario(String),
    #[error("replication {replication}: {source}")]
    Replication {
        replication: u32,
        #[source]
        source: SimError,
    },
    #[error("stored outputs are inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
