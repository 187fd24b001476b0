//! Error types shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("point {point:?} is outside the chart domain of `{chart}`")]
    OutOfDomain { chart: String, point: Vec<f64> },

    #[error("point has {got} coordinates, chart expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite coordinate in point {0:?}")]
    NonFinitePoint(Vec<f64>),

    #[error("spacelike condition violated: largest singular value squared = {lambda1_sq}")]
    NotSpacelike { lambda1_sq: f64 },

    #[error("plane vectors are linearly dependent")]
    DegeneratePlane,

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("unknown registry name `{0}`")]
    UnknownName(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("discrete spacelike bound violated at node {node} (|gradient| = {gradient})")]
    DiscreteSpacelike { node: usize, gradient: f64 },
}

pub type Result<T> = std::result::Result<T, GeomError>;
