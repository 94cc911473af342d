use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {}", .0.join("; "))]
    Schema(Vec<String>),

    #[error("infeasible speed: {0}")]
    InfeasibleSpeed(String),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("subproblem infeasible at outer iteration {iteration}: {detail}")]
    SubproblemInfeasible { iteration: usize, detail: String },

    #[error("infeasible budget: E_max = {budget:.3} J is below the initializer energy {required:.3} J")]
    InfeasibleBudget { budget: f64, required: f64 },

    #[error("instance too large: ~{estimate:.3e} candidate evaluations exceeds the cap of {cap:.0e}")]
    InstanceTooLarge { estimate: f64, cap: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
