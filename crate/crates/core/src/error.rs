use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode count must be at least 1")]
    ZeroModes,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields are sampled on different grids or axes")]
    GridMismatch,

    #[error("non-finite coordinate or value")]
    NonFinite,

    #[error("no axes selected")]
    EmptyAxes,

    #[error("axis {axis} out of range for a {dim}-dimensional field")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("zero-length axis vector")]
    ZeroVector,

    #[error("Alice marginal {value:e} at conditioning point is below the positivity floor {floor:e}")]
    ConditioningUnsupported { value: f64, floor: f64 },

    #[error("herald impossible: outcome probability {0:e} is below the floor")]
    HeraldImpossible(f64),

    #[error("no negative Fock Wigner value found up to level {0}")]
    NoNegativeLevel(usize),

    #[error("measurement element {outcome} has a non-positive Wigner value {value:e}")]
    NegativeMeasurement { outcome: usize, value: f64 },

    #[error("conditioning slice at q = {0} carries no probability mass")]
    EmptySlice(f64),

    #[error("variance chain violated for {quadrature}: homodyne {homodyne} < conditional-Wigner {wigner} - {tolerance}")]
    ChainViolation {
        quadrature: &'static str,
        homodyne: f64,
        wigner: f64,
        tolerance: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
