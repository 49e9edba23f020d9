use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Infinite rate values are not errors; they come back as
/// [`RateValue::Infinite`](crate::rates::RateValue).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate observable: F is constant almost surely (variance {variance:e})")]
    Degenerate { variance: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error(
        "exact enumeration needs {needed} table operations for l = {l}, budget is {budget}; \
         use the Monte Carlo estimate (r_l_mc) instead"
    )]
    BudgetExceeded { l: usize, needed: u128, budget: u64 },

    #[error("requested tolerance {requested:e} is unreachable; best certified tail bound is {achievable:e}")]
    ToleranceUnreachable { requested: f64, achievable: f64 },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Process exit code used by the command-line frontend.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Degenerate { .. } => 2,
            Error::Capacity(_) | Error::BudgetExceeded { .. } => 3,
            Error::ToleranceUnreachable { .. } => 4,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Degenerate { .. } => "degenerate",
            Error::Capacity(_) => "capacity",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::ToleranceUnreachable { .. } => "tolerance_unreachable",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
