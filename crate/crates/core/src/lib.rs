//! Spectral embedding of point clouds through the generalized eigenvalue
//! problem of a graph affinity pencil `(W, D)`.
//!
//! The crate has three layers:
//!
//! * [`graph`] builds sparse symmetric affinity matrices (Gaussian kernel or
//!   kNN), degree and deflation vectors, and batch neighborhoods.
//! * [`solver`] contains the orthogonalization-free iterative eigensolver:
//!   the quartic objective `f2` with local/full/neighbor mini-batch gradient
//!   schemes, the orthogonally-constrained `f1` baseline, stepsize constants
//!   with a guaranteed-convergence bound, Rayleigh–Ritz recovery and the
//!   epoch driver.
//! * [`nn`] parametrizes the eigenvectors by a small fully-connected network
//!   trained with manual backpropagation and Adam, in both the
//!   orthogonalization-free and the constrained (orthogonalization-layer)
//!   pipelines.
//!
//! [`oracle`] holds slow, dependency-free dense reference computations
//! (Jacobi eigensolver, tall QR, Cholesky, finite differences) used for
//! eigenpair recovery and as ground truth in tests; [`data`] provides the
//! moon generators, IDX image parsing and the 1-D clustering metric.
//!
//! The crate is `no_std`-compatible (`default-features = false`); all
//! computation only needs `alloc`. With `std` disabled, solve reports carry
//! zero wall times.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod graph;
pub mod mat;
pub mod nn;
pub mod oracle;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use mat::Mat;
pub use rng::Rng;
