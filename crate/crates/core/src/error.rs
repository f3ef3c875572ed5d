use thiserror::Error;

use crate::hypothesis::HypothesisId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid correlation: {0}")]
    InvalidCorrelation(String),

    #[error("no trials recorded for setting (x={x}, y={y})")]
    EmptySetting { x: usize, y: usize },

    #[error("unsupported scenario for moment relaxation: {0}")]
    UnsupportedScenario(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("iteration limit reached after {iterations} iterations (residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("too few trials: need at least {required}, got {actual}")]
    TooFewTrials { required: usize, actual: usize },

    #[error("trial log is not ordered by trial index (test {test_id}, position {position})")]
    UnorderedTrials { test_id: u64, position: usize },

    #[error("solver failure for hypothesis {hypothesis}: {source}")]
    SolverFailure {
        hypothesis: HypothesisId,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("label out of range at line {line}: {message}")]
    Range { line: usize, message: String },

    #[error("duplicate trial (test {test_id}, trial {trial_index})")]
    DuplicateTrial { test_id: u64, trial_index: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidScenario(_) => "invalid_scenario",
            Error::InvalidCorrelation(_) => "invalid_correlation",
            Error::EmptySetting { .. } => "empty_setting",
            Error::UnsupportedScenario(_) => "unsupported_scenario",
            Error::NumericalFailure(_) => "numerical_failure",
            Error::IterationLimit { .. } => "iteration_limit",
            Error::TooFewTrials { .. } => "too_few_trials",
            Error::UnorderedTrials { .. } => "unordered_trials",
            Error::SolverFailure { .. } => "solver_failure",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Parse { .. } => "parse_error",
            Error::Range { .. } => "range_error",
            Error::DuplicateTrial { .. } => "duplicate_trial",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
        }
    }

    /// True for errors raised by the numerical solvers rather than by bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_) | Error::IterationLimit { .. } | Error::SolverFailure { .. }
        )
    }
}
