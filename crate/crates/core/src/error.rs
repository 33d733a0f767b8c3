use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("kernel is not symmetric (max asymmetry {0:.3e})")]
    AsymmetricKernel(f64),
    #[error("no equilibrium root found in [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("modulation function is not invertible: {0}")]
    NotInvertible(String),
    #[error("gamma blows up near tau = {tau:.6}")]
    BlowUp { tau: f64 },
    #[error("solver diverged at t = {t:.6}: {reason}")]
    Divergence { t: f64, reason: String },
    #[error(
        "Picard iteration failed on window starting at tau = {tau:.6} after {halvings} halvings"
    )]
    PicardFailure { tau: f64, halvings: usize },
    #[error("stability condition not satisfied: {0}")]
    ConditionFailed(String),
    #[error("not enough samples: {0}")]
    InsufficientData(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
