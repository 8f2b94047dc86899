use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("degenerate support: all values are identical")]
    DegenerateSupport,

    #[error("value {value} at index {index} lies outside the mesh interval [{a}, {b}]")]
    OutOfSupport {
        index: usize,
        value: f64,
        a: f64,
        b: f64,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("pseudo-observation {value} is not inside the open unit interval")]
    BoundaryPoint { value: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("cluster collapse: component {component} has effective weight {weight:.3} < {required}")]
    ClusterCollapse {
        component: usize,
        weight: f64,
        required: f64,
    },

    #[error("row {row}: every component log-density is non-finite")]
    DegenerateRow { row: usize },

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
