//! Empirical-Bayes estimation of stochastic block model connectivity and
//! piecewise-constant graphons.
//!
//! The crate is `no_std` (it needs `alloc`). Floating point transcendental
//! functions go through `libm` unless `std` is linked into the final
//! artifact, in which case the platform's inherent `f64` methods are used.
//!
//! Pipeline, bottom-up:
//!
//! * [`graph`]: simple undirected graphs, partitions and per-block counts.
//! * [`numerics`]: log-gamma, digamma, log-beta and a box-constrained
//!   quasi-Newton maximizer.
//! * [`samplers`]: seeded SBM and graphon generators.
//! * [`community`]: partition providers (spectral clustering, variational EM).
//! * [`eb`]: hierarchical Beta-Binomial hyperparameter fit and the shrunken
//!   connectivity estimate, with MLE and fixed-prior baselines.
//! * [`select`]: penalized marginal likelihood for choosing the number of
//!   blocks, and the CVRP baseline.
//! * [`graphon`]: step-function graphons, identifiability ordering, and
//!   integrated squared error.
//! * [`eval`]: error metrics, reference K, held-out likelihood.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod community;
pub mod eb;
mod error;
pub mod eval;
pub mod graph;
pub mod graphon;
mod matrix;
pub mod numerics;
pub mod samplers;
pub mod select;

pub use error::{Error, Result};
pub use matrix::Matrix;
