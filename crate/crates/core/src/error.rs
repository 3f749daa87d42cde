use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("spread {spread_bp} bp is above the grid ceiling of {ceiling_bp} bp")]
    SpreadOutOfRange { spread_bp: f64, ceiling_bp: f64 },

    #[error("target has no variance")]
    DegenerateTarget,

    #[error("coordinate descent did not converge after {sweeps} sweeps (lambda {lambda}, last max change {max_change:e})")]
    NonConvergence { sweeps: usize, lambda: f64, max_change: f64 },

    #[error("lasso objective increased from {before} to {after} in sweep {sweep}")]
    ObjectiveIncrease { sweep: usize, before: f64, after: f64 },

    #[error("design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("within transform did not converge after {iterations} iterations (max change {max_change:e})")]
    WithinNonConvergence { iterations: usize, max_change: f64 },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("ambiguous identifier mapping for {source_id} on {date}: {}", targets.join(", "))]
    AmbiguousMapping { source_id: String, date: String, targets: Vec<String> },

    #[error("{0}")]
    Sampling(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. }
            | Error::ObjectiveIncrease { .. }
            | Error::WithinNonConvergence { .. }
            | Error::Infeasible
            | Error::Unbounded => 3,
            _ => 2,
        }
    }
}
