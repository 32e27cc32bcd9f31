//! Seeded random generation.
//!
//! Monte Carlo work is keyed by `(seed, instance, trial)`: each key selects a
//! distinct ChaCha8 stream, so a trial's draws never depend on which worker
//! ran it or in what order.

use faer::{Col, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix::SymmetricMatrix;

/// Trial index reserved for per-instance setup draws (ground truth, `a`).
pub const SETUP_TRIAL: u32 = u32::MAX;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Counter-based child generator for trial `trial` of instance `instance`.
pub fn trial_rng(seed: u64, instance: u32, trial: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((instance as u64) << 32) | trial as u64);
    rng
}

pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// `rows×cols` matrix of i.i.d. N(0,1), filled column by column.
pub fn gaussian_matrix<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat<f64> {
    let mut m = Mat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = standard_normal(rng);
        }
    }
    m
}

/// Orthonormal `n×k` frame spanning a uniformly random `k`-dimensional subspace.
pub fn random_orthonormal_frame<R: rand::Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Mat<f64> {
    assert!(k <= n, "frame with more columns than rows");
    if k == 0 {
        return Mat::zeros(n, 0);
    }
    gaussian_matrix(n, k, rng).qr().compute_thin_Q()
}

/// Uniform on the unit sphere in `ℝⁿ`.
pub fn random_unit_vector<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Col<f64> {
    loop {
        let g = Col::from_fn(n, |_| standard_normal(rng));
        let norm = g.norm_l2();
        if norm > 1e-300 {
            return Col::from_fn(n, |i| g[i] / norm);
        }
    }
}

/// Symmetric matrix with N(0,1) off-diagonal and N(0,2) diagonal entries.
pub fn random_symmetric<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> SymmetricMatrix {
    let mut m = Mat::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = std::f64::consts::SQRT_2 * standard_normal(rng);
        for i in (j + 1)..n {
            let v = standard_normal(rng);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymmetricMatrix::symmetrized(m)
}
