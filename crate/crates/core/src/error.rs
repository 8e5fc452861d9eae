use std::io;

/// Errors produced anywhere in the fusion pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("window too short: {len} time steps, at least {min} required")]
    WindowTooShort { len: usize, min: usize },

    #[error("series too short: {len} values, at least {min} required")]
    SeriesTooShort { len: usize, min: usize },

    #[error("window has no variables")]
    EmptyWindow,

    #[error("non-finite value at time step {step}, variable {var}")]
    NonFiniteInput { step: usize, var: usize },

    #[error("lag {lag} must be smaller than the series length {len}")]
    LagTooLarge { lag: usize, len: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("duplicate model name `{0}` in roster")]
    DuplicateModelName(String),

    #[error("a model zoo needs at least 2 models, got {0}")]
    RosterTooSmall(usize),

    #[error("model roster mismatch: expected {expected:?}, found {found:?}")]
    RosterMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },

    #[error("no training samples")]
    EmptyDataset,

    #[error("loss became non-finite ({loss}) at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated file: payload needs {expected} bytes, found {actual}")]
    TruncatedFile { expected: usize, actual: usize },

    #[error("checksum mismatch: manifest says {expected}, payload hashes to {actual}")]
    ChecksumMismatch { expected: String, actual: String },

    #[error("cannot select {k_sel} of {k} models")]
    KOutOfRange { k_sel: usize, k: usize },

    #[error("ensemble subset is empty")]
    EmptySubset,

    #[error("invalid seasonal period {period} for a window of {len} steps")]
    InvalidPeriod { period: usize, len: usize },

    #[error("invalid moving-average width {width} for a window of {len} steps")]
    InvalidWidth { width: usize, len: usize },

    #[error("invalid autoregressive order {order} for a window of {len} steps")]
    InvalidOrder { order: usize, len: usize },

    #[error("unknown zoo method `{0}`")]
    UnknownZooMethod(String),

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("need at least {needed} tasks, got {got}")]
    InsufficientTasks { needed: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
