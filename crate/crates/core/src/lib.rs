//! Inexact manifold proximal linear method (IManPL) for composite problems
//!
//! ```text
//! min_{U ∈ St(n, r)}  f(U) + h(c(U)),     h = u‖·‖₁
//! ```
//!
//! Each outer iteration linearizes `f` and `c` at the current point, solves the
//! resulting strongly convex tangent-space subproblem inexactly through its dual
//! (accelerated proximal gradient, or semismooth Newton when `c` is the
//! identity), certifies the inexactness with a primal-dual gap, and retracts
//! back to the manifold with a two-condition Armijo search.
//!
//! Two concrete problems ship with the crate: sparse spectral clustering
//! ([`apps::ssc`]) and sparse PCA ([`apps::spca`]), together with the data
//! generators and clustering metrics needed to evaluate them ([`data`]).

pub mod apg;
pub mod apps;
pub mod data;
pub mod error;
mod kernels;
pub mod manifold;
pub mod parallel;
pub mod problem;
pub mod rng;
pub mod solver;
pub mod ssn;

pub use error::{Error, Result};

/// Dense real matrix used for points, tangent vectors and mapping values.
pub type Mat = nalgebra::DMatrix<f64>;
