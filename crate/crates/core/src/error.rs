use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dense grid of 2^{level} points exceeds the budget 2^{budget}")]
    BudgetExceeded { level: u32, budget: u32 },

    #[error("schedule infeasible at stage {stage}, interval {interval}: {reason}")]
    Infeasible { stage: u32, interval: usize, reason: String },

    #[error("no qualifying enumeration index: {0}")]
    SearchExhausted(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
