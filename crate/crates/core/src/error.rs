use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("ellipticity violated: {0}")]
    Ellipticity(String),
    #[error("grid mismatch: expected {expected} samples, got {got}")]
    GridMismatch { expected: usize, got: usize },
    #[error("boundary data violated: {0}")]
    Boundary(String),
    #[error("incompatible data: |g(0) - sum h_n phi_n| = {residual:e} exceeds {tol:e}")]
    IncompatibleData { residual: f64, tol: f64 },
    #[error("degenerate weight: sum h_n^2 = {0:e}")]
    DegenerateWeight(f64),
    #[error("no sensitive modes: every |b_n| is below {0:e}")]
    InsensitiveMode(f64),
    #[error("degenerate forcing: f vanishes identically on the grid")]
    DegenerateForcing,
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("config error in `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
