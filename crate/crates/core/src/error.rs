use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation too small: discarded probability {tail:.3e} exceeds tolerance {tolerance:.3e}")]
    TruncationTooSmall { tail: f64, tolerance: f64 },
    #[error("degenerate state: {0}")]
    DegenerateState(String),
    #[error("hermite ratio recursion hit a zero of H_{n}(x) at x = {x}")]
    HermiteZeroEncountered { n: usize, x: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("packed vector length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("coefficient block {block} violates hermiticity by {deviation:.3e}")]
    HermiticityViolation { block: &'static str, deviation: f64 },
    #[error("eigen decomposition failed: {0}")]
    EigenFailure(String),
    #[error("integrator step underflow at t = {t}: required step {step:.3e} below minimum")]
    StepUnderflow { t: f64, step: f64 },
    #[error("integrator exceeded {max_steps} steps before t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("post-selection probability {0:.3e} is too small")]
    ZeroProbability(f64),
    #[error("state has negative mass {0:.3e} beyond the clipping limit")]
    PositivityViolation(f64),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
