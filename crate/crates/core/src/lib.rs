//! Symmetry reduction of variational problems on manifolds with
//! cohomogeneity-one singular Riemannian foliations.
//!
//! The crate discretizes leaf-constant (basic) functions on the one-dimensional
//! quotient, minimizes nonlocal p-Kirchhoff type energies on an `L^{p*}`-type
//! constraint, recovers the Lagrange multiplier, and checks on a full product
//! grid that the reduced critical point is critical for arbitrary
//! (non-basic) variations.

pub mod averaging;
pub mod basic;
pub mod criticality;
pub mod error;
pub mod functionals;
pub mod interp;
pub mod linalg;
pub mod models;
pub mod numerics;
pub mod solver;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
