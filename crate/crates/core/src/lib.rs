//! Multi-material topology optimization by projected mirror descent over
//! convex polytopal design sets.
//!
//! A design field `η` assigns every mesh cell a point of a convex polytope
//! `P ⊂ R^n` whose vertices are the admissible material states. Instead of
//! projecting onto `P` pointwise, the design is parametrized by an
//! unconstrained latent field `ψ` through the entropy-based map
//!
//! ```text
//! η = V · softmax(Vᵀ ψ)
//! ```
//!
//! where `V` is the vertex matrix of `P`. The map lands in the interior of
//! `P` by construction, so the optimizer ([`optimizer::simpl_run`]) only has
//! to take gradient steps in `ψ` and enforce the global linear constraints
//! `∫ W η dx ⪯ b` through a small dual problem ([`projection`]).
//!
//! The crate ships everything needed to reproduce the 2D compliance
//! benchmarks at desk scale:
//!
//! - [`polytope`]: the vertex-based design set and its Legendre-map machinery,
//! - [`field`]: uniform rectangular meshes with per-cell and per-node fields,
//! - [`projection`]: Illinois root-finding and Bregman–Dykstra sweeps for the
//!   global constraints,
//! - [`optimizer`]: the mirror-descent loop with generalized Barzilai–Borwein
//!   steps and Armijo backtracking,
//! - [`fem`]: Q1 plane-stress elasticity, the Helmholtz density filter, and
//!   adjoint-consistent compliance gradients,
//! - [`materials`]: multi-material SIMP and rotated orthotropic interpolation,
//! - [`problems`]: ready-made benchmark problem builders,
//! - [`io`]: VTK / PGM / CSV writers,
//! - [`oracles`]: slow independent reference computations used by the
//!   verification suite.

pub mod error;
pub mod field;
pub mod fem;
pub mod io;
pub mod linalg;
pub mod materials;
pub mod optimizer;
pub mod oracles;
pub mod polytope;
pub mod problems;
pub mod projection;

pub use error::Error;
pub use field::{CellField, Mesh, NodalField};
pub use optimizer::{simpl_run, OptHistory, OptOptions, RunResult, StopStatus};
pub use polytope::{BarycentricPoint, Polytope};
pub use projection::{GlobalConstraints, ProjectionResult};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
