//! Bayesian modelling of finite element discretization error.
//!
//! A fine mesh obtained by hierarchical refinement of a coarse mesh stands in
//! for the exact solution space. A Gaussian prior is placed on the fine-scale
//! force vector, pushed through the fine stiffness matrix, and conditioned on
//! the coarse-scale force vector. The posterior moments then describe how far
//! the coarse solution may be from the fine one.
//!
//! Module map:
//!
//! * [`mesh`]: interval and triangle meshes, Gmsh import, hierarchical
//!   refinement and the prolongation matrix.
//! * [`assembly`]: stiffness, mass and load assembly, Galerkin restriction and
//!   Dirichlet elimination.
//! * [`sparse`]: compressed-column storage, sparse Cholesky, dense symmetric
//!   eigendecomposition and seeded normal streams.
//! * [`bayes`]: priors, posterior moments, error recovery, eigenvalue
//!   rescaling and boundary-condition priors.
//! * [`sampling`]: ensemble sampling of the prior and posterior.
//! * [`problems`]: the tapered bar and perforated plate test cases.

pub mod assembly;
pub mod bayes;
pub mod error;
pub mod mesh;
pub mod problems;
pub mod sampling;
pub mod sparse;

pub use error::{Error, Result};

/// Default dimension limit for dense covariance materialization.
pub const DEFAULT_DENSE_CAP: usize = 4096;
