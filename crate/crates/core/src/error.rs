use thiserror::Error;

/// Errors raised across the library. The CLI maps each variant family to a
/// distinct exit code (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("aspect ratio violates m >= n (c >= 1): n = {n}, m = {m}")]
    AspectRatio { n: usize, m: usize },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("evaluation point must satisfy Im z != 0 (got {re} + {im}i)")]
    RealAxis { re: f64, im: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("sampler tuning failure{}: acceptance {acceptance:.4} at step size {step_size:.3e}",
        replication.map(|r| format!(" in replication {r}")).unwrap_or_default())]
    Tuning {
        acceptance: f64,
        step_size: f64,
        replication: Option<usize>,
    },

    #[error("matrix decomposition failed: {0}")]
    Decomposition(String),

    #[error("singular principal minor at index {0}")]
    SingularMinor(usize),

    #[error("too close to a branch point (|discriminant| = {0:.3e})")]
    BranchPoint(f64),

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    FixedPoint { iterations: usize, residual: f64 },

    #[error("grid refinement did not converge: last change {0:.3e}")]
    Refinement(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code: 2 config, 3 sampler tuning, 4 numerical, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::AspectRatio { .. }
            | Error::NonFinite(_)
            | Error::RealAxis { .. }
            | Error::Config(_)
            | Error::Json(_) => 2,
            Error::Tuning { .. } => 3,
            Error::Quadrature(_)
            | Error::Decomposition(_)
            | Error::SingularMinor(_)
            | Error::BranchPoint(_)
            | Error::FixedPoint { .. }
            | Error::Refinement(_) => 4,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}
