use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The lattice does not resolve the requested geometry.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("time step {step} (t = {time}) failed: residual {residual:.3e}")]
    StepFailure {
        step: usize,
        time: f64,
        residual: f64,
    },

    /// A truncation level that would not produce a sub-solution after zero extension.
    #[error("invalid truncation level: {0}")]
    InvalidLevel(String),

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("quadrature tolerance not reached: {0}")]
    Tolerance(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Convergence { .. } | Error::StepFailure { .. } | Error::Tolerance(_) => 3,
            _ => 4,
        }
    }
}
