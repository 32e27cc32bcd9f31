//! Two-point hypothesis constructions behind the minimax lower bounds for
//! spiked PCA, the Gaussian KL divergence they are measured with, and a
//! Monte Carlo check that the plug-in denoising estimator pays a bias of
//! order `σ²n/λ_l*²·|aᵀu_l*|` with constant probability.

use faer::{ColRef, Mat};
use rayon::prelude::*;

use crate::denoise::{bounds_md, check_unit, observe_with, GroundTruthDenoising};
use crate::error::{Error, Result};
use crate::matrix::{
    dist, dot, eigendecompose, eigenvalues, norm2, with_sequential_kernels, Ordering, SymmetricMatrix,
};
use crate::pca::SpikedModel;
use crate::rng::trial_rng;

/// `KL(N(0, Σ₁) ‖ N(0, Σ₀)) = ½(tr(Σ₀⁻¹Σ₁) − p + log det Σ₀ − log det Σ₁)`.
///
/// Evaluated as `½Σ(x_i − log(1 + x_i))` over the eigenvalues `x_i` of
/// `Σ₀^{-1/2}(Σ₁ − Σ₀)Σ₀^{-1/2}`, which stays accurate for nearby pairs.
pub fn gaussian_kl(sigma0: &SymmetricMatrix, sigma1: &SymmetricMatrix) -> Result<f64> {
    let p = sigma0.dim();
    if sigma1.dim() != p {
        return Err(Error::invalid("covariances have different dimensions"));
    }
    let spec0 = eigendecompose(sigma0, Ordering::ByValueDesc)?;
    check_pd(spec0.eigenvalues(), "Sigma0")?;
    check_pd(&eigenvalues(sigma1, Ordering::ByValueDesc)?, "Sigma1")?;
    let v = spec0.eigenvectors();
    let inv_sqrt: Vec<f64> = spec0.eigenvalues().iter().map(|e| 1.0 / e.sqrt()).collect();
    let mut diff = sigma1.as_mat().to_owned();
    diff -= sigma0.as_mat();
    let rotated = v.transpose() * &diff * v;
    let whitened = Mat::from_fn(p, p, |i, j| inv_sqrt[i] * rotated[(i, j)] * inv_sqrt[j]);
    let x = eigenvalues(&SymmetricMatrix::symmetrized(whitened), Ordering::ByValueDesc)?;
    if x.iter().any(|&xi| !(xi > -1.0)) {
        return Err(Error::invalid("Sigma1 is not positive definite"));
    }
    Ok((0.5 * x.iter().map(|&xi| x_minus_log1p(xi)).sum::<f64>()).max(0.0))
}

/// `x − log(1 + x)` without cancellation near 0.
fn x_minus_log1p(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        // x²/2 − x³/3 + x⁴/4 − ...
        let mut term = -x;
        let mut sum = 0.0;
        for k in 2..=12 {
            term *= -x;
            sum += term / k as f64;
        }
        sum
    } else {
        x - x.ln_1p()
    }
}

fn check_pd(vals: &[f64], what: &str) -> Result<()> {
    let trace: f64 = vals.iter().sum();
    let min = vals[vals.len() - 1];
    if !(min > 1e-12 * trace / vals.len() as f64) {
        return Err(Error::invalid(format!("{what} is not positive definite (min eigenvalue {min})")));
    }
    Ok(())
}

/// Scale `c_n` of the hypothesis separation; `Zero` is a diagnostic mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TuningConstant {
    Zero,
    OneSixtyFourth,
    OneSixteenth,
    OneQuarter,
}

impl TuningConstant {
    pub const ALL: [TuningConstant; 4] = [
        TuningConstant::Zero,
        TuningConstant::OneSixtyFourth,
        TuningConstant::OneSixteenth,
        TuningConstant::OneQuarter,
    ];

    pub fn value(self) -> f64 {
        match self {
            TuningConstant::Zero => 0.0,
            TuningConstant::OneSixtyFourth => 1.0 / 64.0,
            TuningConstant::OneSixteenth => 1.0 / 16.0,
            TuningConstant::OneQuarter => 0.25,
        }
    }

    pub fn from_value(c: f64) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.value() == c)
            .ok_or_else(|| Error::invalid(format!("c_n must be one of 0, 1/64, 1/16, 1/4, got {c}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairKind {
    RotationPair,
    DirectionPair,
}

/// Null and alternative covariances (both including `σ²I`).
#[derive(Clone, Debug)]
pub struct HypothesisPair {
    pub sigma0: SymmetricMatrix,
    pub sigma1: SymmetricMatrix,
    pub kind: PairKind,
    /// `θ_n` for a rotation pair, `δ_n` for a direction pair.
    pub separation: f64,
    pub c_n: TuningConstant,
    /// `n·KL(P¹ ‖ P⁰)` for `n` i.i.d. samples.
    pub kl: f64,
}

fn outer_sum(p: usize, terms: &[(f64, Vec<f64>)], ridge: f64) -> SymmetricMatrix {
    let m = Mat::from_fn(p, p, |i, j| {
        let s: f64 = terms.iter().map(|(w, u)| w * u[i] * u[j]).sum();
        s + if i == j { ridge } else { 0.0 }
    });
    SymmetricMatrix::symmetrized(m)
}

fn spike_terms(model: &SpikedModel) -> Vec<(f64, Vec<f64>)> {
    let u = model.u_star();
    model
        .eigvals_star()
        .iter()
        .enumerate()
        .map(|(k, &lam)| (lam, (0..model.p()).map(|i| u[(i, k)]).collect()))
        .collect()
}

fn require_noise(model: &SpikedModel) -> Result<()> {
    if !(model.sigma2() > 0.0) {
        return Err(Error::invalid("hypothesis covariances need sigma2 > 0"));
    }
    Ok(())
}

/// Rotates `(u_l*, u_k*)` by `θ_n = c_n√((λ_l*+σ²)(λ_k*+σ²)/((λ_l*−λ_k*)²n))`
/// inside their span, keeping the spectrum.
pub fn rotation_pair(model: &SpikedModel, l: usize, k: usize, c_n: TuningConstant) -> Result<HypothesisPair> {
    let r = model.rank();
    if l == k || l == 0 || k == 0 || l > r || k > r {
        return Err(Error::invalid(format!("need distinct l, k in 1..={r}, got l={l}, k={k}")));
    }
    require_noise(model)?;
    let (lam_l, lam_k) = (model.eigvals_star()[l - 1], model.eigvals_star()[k - 1]);
    if lam_l == lam_k {
        return Err(Error::invalid("rotation pair needs lambda_l* != lambda_k*"));
    }
    let s2 = model.sigma2();
    let n = model.n() as f64;
    let theta = c_n.value() * ((lam_l + s2) * (lam_k + s2) / ((lam_l - lam_k).powi(2) * n)).sqrt();
    if theta.abs() > 0.25 {
        return Err(Error::invalid(format!(
            "sample size too small: theta_n = {theta} exceeds 1/4"
        )));
    }
    let mut terms = spike_terms(model);
    let (s, c) = theta.sin_cos();
    let (ul, uk) = (terms[l - 1].1.clone(), terms[k - 1].1.clone());
    terms[l - 1].1 = ul.iter().zip(&uk).map(|(a, b)| c * a + s * b).collect();
    terms[k - 1].1 = ul.iter().zip(&uk).map(|(a, b)| -s * a + c * b).collect();
    let sigma0 = model.covariance();
    let sigma1 = outer_sum(model.p(), &terms, s2);
    let kl = n * (lam_l - lam_k).powi(2) * s * s / (2.0 * (lam_l + s2) * (lam_k + s2));
    Ok(HypothesisPair {
        sigma0,
        sigma1,
        kind: PairKind::RotationPair,
        separation: theta,
        c_n,
        kl,
    })
}

/// Tilts `u_l*` toward the part of `a` orthogonal to `U*`:
/// `ũ_l = (u_l* + δ_n a_⊥)/√(1+δ_n²)`, `δ_n = c_n√((λ_l*+σ²)σ²/(λ_l*²n))`.
pub fn direction_pair(
    model: &SpikedModel,
    l: usize,
    a: ColRef<'_, f64>,
    c_n: TuningConstant,
) -> Result<HypothesisPair> {
    let r = model.rank();
    if l == 0 || l > r {
        return Err(Error::invalid(format!("l = {l} outside 1..={r}")));
    }
    check_unit(a, model.p())?;
    require_noise(model)?;
    let u = model.u_star();
    let coef = u.transpose() * a;
    let proj = a - u * &coef;
    let len = norm2(proj.as_ref());
    if !(len > 1e-9) {
        return Err(Error::invalid("a lies in span(U*); no orthogonal direction to perturb toward"));
    }
    let lam = model.eigvals_star()[l - 1];
    let s2 = model.sigma2();
    let n = model.n() as f64;
    let delta = c_n.value() * ((lam + s2) * s2 / (lam * lam * n)).sqrt();
    if delta > 1.0 {
        return Err(Error::invalid(format!("sample size too small: delta_n = {delta} exceeds 1")));
    }
    let mut terms = spike_terms(model);
    let norm = (1.0 + delta * delta).sqrt();
    terms[l - 1].1 = (0..model.p()).map(|i| (u[(i, l - 1)] + delta * proj[i] / len) / norm).collect();
    let sigma0 = model.covariance();
    let sigma1 = outer_sum(model.p(), &terms, s2);
    let kl = n * gaussian_kl(&sigma0, &sigma1)?;
    Ok(HypothesisPair {
        sigma0,
        sigma1,
        kind: PairKind::DirectionPair,
        separation: delta,
        c_n,
        kl,
    })
}

/// Multipliers `c` of the bias scale at which exceedance is reported.
pub const PLUGIN_THRESHOLDS: [f64; 3] = [0.25, 0.5, 1.0];

/// Distances at or below this level are eigensolver rounding and never count
/// as exceeding the bias scale.
pub const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct PluginLowerReport {
    /// `σ²n/λ_l*²·|aᵀu_l*|`
    pub bias_scale: f64,
    pub thresholds: [f64; 3],
    /// Fraction of trials with `dist ≥ c·bias_scale` (and above [`ROUNDING_FLOOR`]),
    /// one entry per threshold.
    pub exceed_probability: [f64; 3],
    pub distances: Vec<f64>,
    /// Whether the eigengap condition of the denoising guarantees holds.
    pub feasible: bool,
}

/// Empirical exceedance of the plug-in error over the bias scale.
///
/// Trial `t` draws its noise from `trial_rng(seed, 0, t)`.
pub fn plugin_lower_experiment(
    model: &GroundTruthDenoising,
    a: ColRef<'_, f64>,
    l: usize,
    trials: usize,
    seed: u64,
) -> Result<PluginLowerReport> {
    check_unit(a, model.n())?;
    if l == 0 || l > model.rank() {
        return Err(Error::invalid(format!("l = {l} outside 1..={}", model.rank())));
    }
    let truth = model.functional(a, l);
    let lam = model.eigvals_star()[l - 1];
    let bias_scale = model.sigma().powi(2) * model.n() as f64 / (lam * lam) * truth.abs();
    let a_owned = a.to_owned();
    let distances = with_sequential_kernels(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = trial_rng(seed, 0, t as u32);
                let (m, _) = observe_with(model, &mut rng);
                let spec = eigendecompose(&m, Ordering::ByMagnitudeDesc)?;
                Ok(dist(dot(a_owned.as_ref(), spec.eigenvector(l - 1)), truth).value())
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let mut exceed = [0.0; 3];
    for (slot, c) in exceed.iter_mut().zip(PLUGIN_THRESHOLDS) {
        let hits = distances.iter().filter(|&&d| d > ROUNDING_FLOOR && d >= c * bias_scale).count();
        *slot = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
    }
    let lambda_max = model.lambda_max();
    Ok(PluginLowerReport {
        bias_scale,
        thresholds: PLUGIN_THRESHOLDS,
        exceed_probability: exceed,
        distances,
        feasible: bounds_md(model, a, l, lambda_max)?.eigengap_ok,
    })
}

/// Smallest `n` meeting `n ≥ max_k (λ_k*+σ²)(λ_l*+σ²)/(λ_l*−λ_k*)² ∨ (λ_l*+σ²)σ²/λ_l*²`.
pub fn minimax_sample_size(eigvals_star: &[f64], l: usize, sigma2: f64) -> f64 {
    let lam = eigvals_star[l - 1];
    let mut need = (lam + sigma2) * sigma2 / (lam * lam);
    for (k, &other) in eigvals_star.iter().enumerate() {
        if k + 1 != l {
            need = need.max((other + sigma2) * (lam + sigma2) / (lam - other).powi(2));
        }
    }
    need
}
