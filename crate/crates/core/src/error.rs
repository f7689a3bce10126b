use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("weight-tail: z_max = {0} is below 8, the Gaussian weight tail is not resolved")]
    WeightTail(f64),

    #[error("field does not belong to this grid (field grid id {field:016x}, grid id {grid:016x})")]
    GridMismatch { field: u64, grid: u64 },

    #[error("boundary row violated: {0}")]
    Boundary(String),

    #[error("ladder-truncation: tail ratio {tail:.3e} exceeds {limit:.0e} at tau = {tau}")]
    LadderTruncation { tail: f64, limit: f64, tau: f64 },

    #[error("derivative order {m} exceeds the hard cap {cap}")]
    OrderTooLarge { m: usize, cap: usize },

    #[error("radius-collapse at t = {t}: tau^(3/2) would become {value:.3e}")]
    RadiusCollapse { t: f64, value: f64 },

    #[error("parameter-regime: {0}")]
    Regime(String),

    #[error("non-finite tendency at t = {t}: {detail}")]
    NonFinite { t: f64, detail: String },

    #[error("CFL abort at t = {t}: step still unstable after {halvings} halvings (dt = {dt:.3e})")]
    CflAbort { t: f64, dt: f64, halvings: u32 },

    #[error("config: {0}")]
    Config(String),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("insufficient-samples: {found} samples in window, need at least {needed}")]
    InsufficientSamples { found: usize, needed: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
