use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("spectrum needs at least {needed} phases, got {got}")]
    TooFewPhases { needed: usize, got: usize },

    #[error("duplicate eigenphase near {0}")]
    DuplicatePhase(f64),

    #[error("eigenvalue {value} at index {index} is outside (0, 1)")]
    EigenvalueOutOfDomain { index: usize, value: f64 },

    #[error("infeasible packing: {0}")]
    InfeasiblePacking(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),

    #[error("initial state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("element has nonpositive Jacobian determinant {det} at a Gauss point")]
    NonpositiveJacobian { det: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("separation gate failed: min gap {min_gap:e} needs n >= {required_n}, got n = {n}")]
    SeparationGate {
        min_gap: f64,
        n: u32,
        required_n: u32,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
