use thiserror::Error;

use crate::domain::{ModelRef, RequestId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Schedule constraint violations reported by [`crate::schedule::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("request {0} is scheduled more than once")]
    DuplicateRequest(RequestId),
    #[error("request {0} is not scheduled")]
    MissingRequest(RequestId),
    #[error("schedule references unknown request {0}")]
    UnknownRequest(RequestId),
    #[error("request {request} is assigned invalid model {model}")]
    InvalidModel { request: RequestId, model: ModelRef },
    #[error("request {request} is assigned to worker {worker}, but only {workers} exist")]
    InvalidWorker {
        request: RequestId,
        worker: usize,
        workers: usize,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("request {0} does not appear in the schedule")]
    NotScheduled(RequestId),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(#[from] Violation),
    #[error("deadline must be positive, got {0} ms")]
    InvalidDeadline(f64),
    #[error("confusion matrix has no observations")]
    EmptyConfusion,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionError { expected: usize, actual: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("prior kind requires a class frequency hint{0}")]
    MissingPriorHint(&'static str),
    #[error("neighbor corpus has {available} points, {requested} requested")]
    InsufficientCorpus { requested: usize, available: usize },
    #[error("group is empty")]
    EmptyGroup,
    #[error("application {0} already has a short-circuit variant")]
    DuplicateSneakPeek(String),
    #[error("exhaustive search needs {candidates} candidates, budget is {budget}")]
    BudgetExceeded { candidates: u128, budget: u128 },
    #[error("execution trace is missing request {0}")]
    IncompleteTrace(RequestId),
    #[error("scenario generation failed: {0}")]
    Gen(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown application `{0}`")]
    UnknownApplication(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn dims(expected: usize, actual: usize) -> Self {
        Error::DimensionError { expected, actual }
    }
}
