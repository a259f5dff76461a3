use thiserror::Error;

use crate::mesh::EdgeKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("edge ({}, {}) has {faces} incident faces, expected 2", .edge.0, .edge.1)]
    NonManifoldEdge { edge: EdgeKey, faces: usize },

    #[error("not a torus: Euler characteristic is {euler}")]
    NotTorus { euler: i64 },

    #[error("1-skeleton is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("face {face} is degenerate")]
    DegenerateFace { face: usize },

    #[error("lengths are not uniformly packable: min cos(theta) = {min_cos:.6} < eps = {eps}")]
    NotUniformlyPackable { min_cos: f64, eps: f64 },

    #[error("regularity check failed at eps = {eps}: min cos(theta) = {min_cos:.6}, min angle = {min_angle:.6}")]
    RegularityFailure { eps: f64, min_cos: f64, min_angle: f64 },

    #[error("edge weight {index} is not positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("right-hand side is not mean-zero (sum = {sum:e})")]
    NotMeanZero { sum: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("line search lost admissibility at iteration {iteration}")]
    LostAdmissibility { iteration: usize },

    #[error("graph has {vertices} vertices; exhaustive enumeration is limited to {limit}")]
    TooLarge { vertices: usize, limit: usize },

    #[error("minimal lattice image is ambiguous for displacement ({}, {})", .displacement[0], .displacement[1])]
    AmbiguousImage { displacement: [f64; 2] },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
