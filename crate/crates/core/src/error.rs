use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{what} did not converge (residual {residual:e})")]
    NonConvergence { what: &'static str, residual: f64 },
    #[error("spin norm drifted by {drift:e} at t = {t}")]
    StepRejected { t: f64, drift: f64 },
    #[error("spectral parameter {u} within tolerance of pole {pole}")]
    PoleHit { u: f64, pole: f64 },
    #[error("ambiguous root pairing near {cluster:?}")]
    DegenerateRoots { cluster: Vec<(f64, f64)> },
    #[error("no root: {0}")]
    NoRoot(String),
    #[error("no spectral peak above the noise floor")]
    NoPeak,
    #[error("exact oracle limited to 4 sites, got {0}")]
    SizeExceeded(usize),
    #[error("discrete Chern sum {0} is not within 0.01 of an integer")]
    NonIntegerChern(f64),
    #[error("budget exhausted at F_avg = {best}")]
    BudgetExhausted { best: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
