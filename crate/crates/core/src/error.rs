use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported order of differencing/integration: {0} (supported: 0..=2)")]
    UnsupportedOrder(usize),

    #[error("missing anchors: expected {expected} initial levels, got {got}")]
    MissingAnchors { expected: usize, got: usize },

    #[error("domain error in series '{series}': {reason}")]
    Domain { series: String, reason: String },

    #[error("insufficient observations: {0}")]
    InsufficientData(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error at row {row}, column {column}: {reason}")]
    Ingest {
        row: usize,
        column: usize,
        reason: String,
    },

    #[error("panel invariant violated: {0}")]
    InvalidPanel(String),

    #[error("solver did not converge after {iterations} sweeps (KKT residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("solver fault: objective increased from {before:e} to {after:e} in cycle {cycle}")]
    SolverFault {
        cycle: usize,
        before: f64,
        after: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 1 usage/configuration, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::UnsupportedOrder(_) => 1,
            Error::Ingest { .. }
            | Error::InvalidPanel(_)
            | Error::Domain { .. }
            | Error::MissingAnchors { .. }
            | Error::InsufficientData(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::Numerical(_) | Error::Convergence { .. } | Error::SolverFault { .. } => 3,
        }
    }
}
