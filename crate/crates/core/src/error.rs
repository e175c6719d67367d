use thiserror::Error;

use crate::validate::ValidationReport;

#[derive(Debug, Error)]
pub enum SmdpError {
    #[error("action {a} is not admissible at (x={x}, t={t})")]
    InadmissibleAction { x: usize, t: usize, a: usize },

    #[error("unknown state id {0}")]
    UnknownState(usize),

    #[error("unknown action id {0}")]
    UnknownAction(usize),

    #[error("stage {n} out of range for horizon {horizon}")]
    StageOutOfRange { n: usize, horizon: usize },

    /// A table was queried outside the reachable set `t <= n`.
    #[error("cell (n={n}, x={x}, t={t}) is outside the reachable set")]
    Unreachable { n: usize, x: usize, t: usize },

    #[error("policy entry at (n={n}, x={x}, t={t}) is not admissible")]
    InadmissiblePolicy { n: usize, x: usize, t: usize },

    #[error("invalid environment:\n{0}")]
    InvalidEnv(ValidationReport),

    #[error("path enumeration needs {paths} paths, above the limit of {limit}")]
    EnumerationTooLarge { paths: f64, limit: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("k_max = {k_max} exceeds horizon {horizon}")]
    KMaxExceedsHorizon { k_max: usize, horizon: usize },

    #[error("sojourn pmf of state {0} has zero mass")]
    ZeroMassPmf(usize),

    #[error("invalid Markov additive spec: {0}")]
    InvalidHmap(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = SmdpError> = std::result::Result<T, E>;
