use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("solver stalled at lambda = {lambda}: {reason}")]
    SolverStall { lambda: f64, reason: String },

    #[error("lambda {lambda} is below the terminal lambda {terminal} of the path")]
    OutOfRange { lambda: f64, terminal: f64 },

    #[error("oracle failed: {0}")]
    OracleFailure(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("degenerate component {component}: {reason}")]
    DegenerateComponent { component: usize, reason: String },

    #[error("model selection failed: every candidate is degenerate")]
    SelectionFailure,

    #[error("mixture fit failed: {0}")]
    FitFailure(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
