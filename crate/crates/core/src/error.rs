use thiserror::Error;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("point ({x}, {y}) does not lie on a {label} edge")]
    LabelMismatch { x: f64, y: f64, label: String },

    #[error("point ({x}, {y}) lies outside {region}")]
    OutsideRegion { x: f64, y: f64, region: &'static str },

    #[error("mesh is not valid: {0}")]
    InvalidMesh(String),

    #[error("refinement would exceed {limit} elements")]
    TooManyElements { limit: usize },

    #[error("unsupported polynomial degree {0} (supported: 1, 2, 3)")]
    UnsupportedDegree(usize),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("iterative solver stopped after {iterations} iterations at relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("no mesh vertex lies on the interface x = {x_gamma}")]
    InterfaceNotResolved { x_gamma: f64 },

    #[error("patch of vertex {vertex} violates the compatibility condition by {value:e}")]
    CompatibilityViolation { vertex: usize, value: f64 },

    #[error("patch {0} has no elements")]
    EmptyPatch(String),

    #[error("missing flux contribution for {0}")]
    MissingContribution(String),

    #[error("point location failed for {failed} of {total} quadrature points")]
    LocateFailures { failed: usize, total: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
