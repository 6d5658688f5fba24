//! Maximally correlated principal component analysis.
//!
//! MCPCA looks for per-feature, possibly nonlinear, zero-mean unit-variance
//! transformations whose covariance matrix has the largest q-Ky Fan norm
//! (sum of its q largest eigenvalues). This crate carries the algorithmic
//! core and is `no_std` with `alloc`; CSV, JSON, and the command line live in
//! the companion `mcpca-cli` crate.
//!
//! Modules follow the pipeline:
//!
//! - [`linalg`], [`data`], [`distribution`]: dense matrices, the symmetric
//!   eigensolver, encoded data tables, empirical distributions and Q-matrices.
//! - [`discrete`]: population MCPCA over pairwise joint distributions (R-matrix,
//!   rank-one closed form, Ky Fan upper bound, block coordinate descent).
//! - [`sample`]: MCPCA straight from a data matrix via conditional expectations.
//! - [`continuous`]: knot selection, discretization and piecewise-linear lifting.
//! - [`pca`], [`metrics`]: the PCA baseline and evaluation metrics.
//! - [`synth`]: seeded generators and the brute-force ternary oracle.

#![no_std]
// `!(a < b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod bcd;
pub mod continuous;
pub mod data;
pub mod discrete;
pub mod distribution;
mod error;
pub mod linalg;
pub mod metrics;
pub mod pca;
pub mod restart;
mod rng;
pub mod sample;
pub mod synth;

pub use error::{Error, Result, Warning};
pub use rng::sub_rng;
