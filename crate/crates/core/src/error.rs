use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BgkError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel moment of order -1 diverges at zero distance")]
    Singularity,

    #[error("quadrature did not converge on [{lo}, {hi}]: error estimate {error:e} after {subdivisions} subdivisions")]
    Quadrature {
        lo: f64,
        hi: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("operator assembly produced a non-finite entry at row {row}, column {col}")]
    Assembly { row: usize, col: usize },

    #[error("leading eigenvalue is numerically degenerate: |lambda1| = {lambda1:e}, |lambda2| = {lambda2:e}")]
    Degenerate { lambda1: f64, lambda2: f64 },

    #[error("steady density solve failed: {0}")]
    Solve(String),

    #[error("negative temperature {value:e} at node {node}")]
    NegativeTemperature { node: usize, value: f64 },

    #[error("velocity is zero: the grazing set has no Duhamel representation")]
    Grazing,

    #[error("admissibility condition violated: {0}")]
    Condition(String),

    #[error("fixed-point iteration did not converge in {iterations} iterations (last delta {last:e})")]
    NonConvergence { iterations: usize, deltas: Vec<f64>, last: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, BgkError>;
