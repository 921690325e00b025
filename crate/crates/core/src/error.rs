use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not unitary (max |U†U - 1| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not Hermitian (max |H - H†| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "dual-tone mixing angle {alpha} is degenerate (single-tone request); \
         use a channel A pulse for alpha = pi or a channel B pulse for alpha = 0"
    )]
    DegenerateDualTone { alpha: f64 },

    #[error("integration error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Integration { estimate: f64, tolerance: f64 },

    #[error("{what}: {value:.3e} exceeds limit {limit:.3e}")]
    Tolerance {
        what: String,
        value: f64,
        limit: f64,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by numerics exceeding a tolerance rather than
    /// by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Integration { .. } | Error::Tolerance { .. })
    }
}
