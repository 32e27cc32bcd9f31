//! De-biased estimators for linear functionals of eigenvectors.
//!
//! Two observation models are covered:
//!
//! * **matrix denoising**: `M = M* + H` with a rank-`r` symmetric `M*` and a
//!   symmetric Gaussian noise matrix `H` ([`denoise`]);
//! * **spiked-covariance PCA**: samples `s_i ~ N(0, Σ* + σ²I)` with a rank-`r`
//!   spike `Σ*` ([`pca`]).
//!
//! For a fixed unit vector `a`, the plug-in estimate `aᵀu_l` of `aᵀu_l*`
//! systematically shrinks toward zero. The estimators here rescale it by a
//! factor computed from the bulk eigenvalues of the observed matrix alone.
//!
//! Supporting modules provide the random-matrix-law approximations of those
//! factors ([`laws`]), exact numerical checks of the eigenvector/eigenvalue
//! identities used to analyse the estimators ([`master`]), the two-point
//! minimax constructions and Gaussian KL divergence ([`lowerbounds`]), and a
//! deterministic Monte Carlo harness ([`harness`]).
//!
//! Indices `l`, `k` and the harness basis index are
//! 1-based throughout, matching the usual "l-th eigenvalue" convention.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod denoise;
pub mod error;
pub mod harness;
pub mod io;
pub mod laws;
pub mod lowerbounds;
pub mod master;
pub mod matrix;
pub mod pca;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::{
    check_interlacing, dist, eigendecompose, eigenvalues, DistanceValue, Ordering,
    SpectralDecomposition, SymmetricMatrix,
};
