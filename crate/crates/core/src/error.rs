use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("profile is not monotone: {0}")]
    NonMonotone(String),
    #[error("profile derivatives are inconsistent: {0}")]
    RegularityFail(String),
    #[error("value {value} lies outside the profile range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("grid is not graded about y0 = {y0} (local panel {panel:.3e}, eps {eps:.3e})")]
    GradingMissing { y0: f64, panel: f64, eps: f64 },
    #[error("I - S is nearly singular (condition estimate {0:.3e})")]
    NearSingularResolvent(f64),
    #[error("epsilon limit did not converge: {0}")]
    NoConvergence(String),
    #[error("time step {dt} exceeds the stability bound {dt_max}")]
    StepTooLarge { dt: f64, dt_max: f64 },
    #[error("scattering tail {tail:.3e} exceeds 10% of the accumulated integral {integral:.3e}")]
    TailTooLarge { tail: f64, integral: f64 },
    #[error("spectrum certification rejected: {0}")]
    Rejected(String),
    #[error("log-log fit has r2 = {r2:.4} < 0.95")]
    PoorFit { r2: f64 },
    #[error("witness does not reproduce f' (defect {0:.3e})")]
    WitnessMismatch(f64),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
