use thiserror::Error;

use crate::game_model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid mixed strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("game of size {rows}x{cols} exceeds the enumeration cap of {cap}")]
    UnsupportedSize { rows: usize, cols: usize, cap: usize },

    #[error("no equilibrium survived verification at tolerance {tolerance:e} (numerically degenerate game)")]
    DegenerateGame { tolerance: f64 },

    #[error("selection failed at state {state}, time-remaining {t}: {source}")]
    SelectionFailed {
        state: usize,
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("policy has no entry for state {state}, time-remaining {t}")]
    MissingPolicyEntry { state: usize, t: usize },

    #[error("unknown state {0}")]
    UnknownState(usize),

    #[error("sparse tree needs {required} nodes but the budget is {budget}")]
    NodeBudgetExceeded { required: u128, budget: u64 },

    #[error("invalid stochastic game:\n{0}")]
    InvalidGame(ValidationReport),
}
