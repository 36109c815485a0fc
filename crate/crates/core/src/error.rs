use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("collision tables need {required_bytes} bytes, cap is {cap_bytes} bytes ({entries} stencil entries of {entry_bytes} bytes)")]
    TablesTooLarge {
        required_bytes: usize,
        cap_bytes: usize,
        entries: usize,
        entry_bytes: usize,
    },

    #[error("conservation projection failed: {0}")]
    Projection(String),

    #[error("time step {dt} exceeds the stability bound {max_dt}")]
    StepTooLarge { dt: f64, max_dt: f64 },

    #[error("conservation drift {drift:.3e} in {quantity} at t = {t} exceeds {tolerance:.1e}")]
    ConservationDrift {
        quantity: String,
        drift: f64,
        tolerance: f64,
        t: f64,
    },

    #[error("entropy increased by {increase:.3e} at step {step} (t = {t}), tolerance {tolerance:.1e}")]
    EntropyIncrease {
        step: usize,
        t: f64,
        increase: f64,
        tolerance: f64,
    },

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
