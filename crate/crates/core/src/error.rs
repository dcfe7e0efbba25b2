use thiserror::Error;

use crate::solver::SolveStatus;

pub type Result<T> = std::result::Result<T, PcisError>;

#[derive(Debug, Error)]
pub enum PcisError {
    #[error("empty restriction")]
    EmptyRestriction,

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("state index {0} is out of range")]
    StateOutOfRange(usize),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("missing kernel row for (state `{state}`, action `{action}`)")]
    MissingRow { state: String, action: String },

    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("LP/DP inconsistency at step {step}, state `{state}`: no action attains the LP value")]
    LpDpInconsistency { step: usize, state: String },

    #[error("solver finished with status {0}")]
    Solver(SolveStatus),

    #[error("seed set not robustly invariant")]
    SeedNotRobust,

    #[error("grid too fine: {cells} state cells exceed the cap of {cap}")]
    GridTooFine { cells: usize, cap: usize },

    #[error("invalid density: t(y|x,u) = {value} at y = {y:?}")]
    InvalidDensity { value: f64, y: Vec<f64> },

    #[error("grid size {delta} is too coarse for a certified result; maximum admissible grid size is {max_delta:e}")]
    InfeasibleGridSize { delta: f64, max_delta: f64 },

    #[error("policy undefined at state `{state}` (step {step})")]
    PolicyUndefined { state: String, step: usize },

    #[error("model cannot be serialized: {0}")]
    NotSerializable(String),

    #[error("solver backend `{0}` is not available in this build")]
    BackendUnavailable(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for PcisError {
    fn from(err: serde_json::Error) -> Self {
        PcisError::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
