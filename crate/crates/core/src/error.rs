use thiserror::Error;

/// Errors produced by the toolkit. Every variant carries enough context to
/// diagnose the failing input without a debugger.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("degenerate triangle {triangle}: area {area:e}")]
    DegenerateTriangle { triangle: usize, area: f64 },
    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),
    #[error("resolution too coarse: {0}")]
    Resolution(String),
    #[error("mass matrix rank {rank} is not larger than k = {k}")]
    RankDeficient { rank: usize, k: usize },
    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),
    #[error("balancing failed after {iterations} iterations, best residual {residual:e}")]
    BalanceFailure { iterations: usize, residual: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code class: 2 for usage/input problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::InvalidParameter(_)
            | Error::Capacity(_)
            | Error::UnsupportedTopology(_)
            | Error::Resolution(_)
            | Error::Io { .. }
            | Error::Parse(_) => 2,
            _ => 3,
        }
    }
}
