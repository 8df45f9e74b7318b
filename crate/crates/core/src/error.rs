//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by the design-map, projection, and FEM layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input (wrong value range, degenerate vertex list, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Field shapes (mesh or channel count) do not match.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The inverse Legendre map did not converge; the target point is on or
    /// numerically indistinguishable from the polytope boundary.
    #[error("point too close to the polytope boundary (residual {residual:.3e} after {iterations} iterations)")]
    BoundaryProximity { residual: f64, iterations: usize },

    /// A projection bracket grew past its cap without a sign change: no
    /// strictly feasible point exists in the constraint direction.
    #[error("constraint set infeasible: {0}")]
    Infeasible(String),

    /// An iterative procedure hit its iteration cap. Carries the residual a
    /// caller may want to report (constraint violations for Dykstra sweeps).
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Linear solver failure (factorization breakdown or residual check).
    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    /// Material parameters produce an indefinite constitutive matrix.
    #[error("invalid material input: {0}")]
    InvalidMaterial(String),

    /// File output failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
