use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not Hermitian (anti-Hermitian part has Frobenius norm {anti_hermitian_norm:e})")]
    NonHermitian { anti_hermitian_norm: f64 },

    #[error("step size underflow at t = {t} (h = {step:e})")]
    StepUnderflow { t: f64, step: f64 },

    #[error("tolerance not achievable: {0}")]
    Tolerance(String),

    #[error("initial state is not an energy eigenstate (transverse fraction {transverse:e})")]
    NotEigenstate { transverse: f64 },

    #[error("time span mismatch: {0}")]
    SpanMismatch(String),

    #[error("frame {requested} out of range (cascade has frames 0..={available})")]
    FrameOutOfRange { requested: usize, available: usize },

    #[error("entropy map grids differ: {0}")]
    GridMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line runner: 2 for usage and
    /// configuration problems, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}
