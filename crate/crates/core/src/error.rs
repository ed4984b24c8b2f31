use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("enumeration cap exceeded: {steps} steps > cap {cap}")]
    CapExceeded { steps: u64, cap: u64 },
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("empty path set for the requested crossing")]
    EmptyPathSet,
    #[error("disorder word too short: need {need} letters, have {have}")]
    WordTooShort { need: usize, have: usize },
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
    #[error("outside the sampled field: {0}")]
    OutOfField(String),
    #[error("infeasible step budget: {0}")]
    Infeasible(String),
    #[error("no convergence after {iterations} iterations, best bracket [{lo}, {hi}]")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
}

pub type Result<T> = std::result::Result<T, Error>;
