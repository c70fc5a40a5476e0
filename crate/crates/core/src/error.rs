use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group descriptor: {0}")]
    InvalidDescriptor(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("sampler gave up after {attempts} attempts")]
    SamplingFailed { attempts: usize },

    #[error("unitarity drift {defect:e} exceeds tolerance {tolerance:e}")]
    Drift { defect: f64, tolerance: f64 },

    #[error("eigensolver did not converge")]
    EigenSolver,

    #[error("spectrum is not regular: minimal eigenangle gap {gap:e} below {tolerance:e}")]
    Degenerate { gap: f64, tolerance: f64 },

    #[error("not a probability density: minimum value {min:e}")]
    NotADensity { min: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("statistic mismatch: {0}")]
    StatisticMismatch(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
