//! Spiked-covariance PCA: columns `s_i ~ N(0, Σ* + σ²I_p)` with a rank-`r`
//! spike `Σ* = U*Λ*U*ᵀ`, and estimators built on `(1/n)SSᵀ`.
//!
//! Sums written over `r < i ≤ n` take the eigenvalues of the `p×p` sample
//! covariance and treat `λ_i = 0` for `min(n, p) < i ≤ n`, which is what the
//! spectrum of the `n×n` matrix `SᵀS/n` would supply.

use faer::{ColRef, Mat, MatRef};
use rand::Rng;

use crate::denoise::{check_unit, collides, eigengap, COLLISION_TOL};
use crate::error::{Error, Result};
use crate::laws::NoiseSpectrumLaw;
use crate::matrix::{
    dot, eigendecompose, eigenvalues, ensure_orthonormal, Ordering, SpectralDecomposition,
    SymmetricMatrix,
};
use crate::rng::{gaussian_matrix, random_orthonormal_frame, seeded};

#[derive(Clone, Debug)]
pub struct SpikedModel {
    p: usize,
    n: usize,
    eigvals_star: Vec<f64>,
    u_star: Mat<f64>,
    sigma2: f64,
}

impl SpikedModel {
    pub fn new(p: usize, n: usize, eigvals_star: Vec<f64>, u_star: Mat<f64>, sigma2: f64) -> Result<Self> {
        let r = eigvals_star.len();
        if r == 0 || r >= p || n == 0 {
            return Err(Error::invalid(format!(
                "spiked model needs 1 <= r < p and n >= 1, got r={r}, p={p}, n={n}"
            )));
        }
        if eigvals_star.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("spike eigenvalues must be finite and positive"));
        }
        if eigvals_star.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("spike eigenvalues must be non-increasing"));
        }
        if u_star.nrows() != p || u_star.ncols() != r {
            return Err(Error::invalid(format!(
                "U* must be {p}x{r}, got {}x{}",
                u_star.nrows(),
                u_star.ncols()
            )));
        }
        ensure_orthonormal(u_star.as_ref())?;
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid("sigma2 must be finite and nonnegative"));
        }
        Ok(Self {
            p,
            n,
            eigvals_star,
            u_star,
            sigma2,
        })
    }

    pub fn with_random_frame<R: Rng + ?Sized>(
        p: usize,
        n: usize,
        eigvals_star: Vec<f64>,
        sigma2: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let r = eigvals_star.len();
        if r == 0 || r >= p {
            return Err(Error::invalid(format!("rank must satisfy 1 <= r < p, got r={r}, p={p}")));
        }
        let u = random_orthonormal_frame(p, r, rng);
        Self::new(p, n, eigvals_star, u, sigma2)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.eigvals_star.len()
    }

    pub fn eigvals_star(&self) -> &[f64] {
        &self.eigvals_star
    }

    pub fn u_star(&self) -> MatRef<'_, f64> {
        self.u_star.as_ref()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigvals_star[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigvals_star[self.rank() - 1]
    }

    pub fn kappa(&self) -> f64 {
        self.lambda_max() / self.lambda_min()
    }

    /// 1-based `l`; equals `λ_1*` when `r = 1`.
    pub fn eigengap(&self, l: usize) -> f64 {
        eigengap(&self.eigvals_star, l)
    }

    /// `Σ = Σ* + σ²I_p`.
    pub fn covariance(&self) -> SymmetricMatrix {
        let u = &self.u_star;
        let m = Mat::from_fn(self.p, self.p, |i, j| {
            let spike: f64 = (0..self.rank()).map(|k| self.eigvals_star[k] * u[(i, k)] * u[(j, k)]).sum();
            spike + if i == j { self.sigma2 } else { 0.0 }
        });
        SymmetricMatrix::symmetrized(m)
    }

    pub fn functional(&self, a: ColRef<'_, f64>, l: usize) -> f64 {
        dot(a, self.u_star.col(l - 1))
    }
}

/// `p×n` data, column `i` equal to `U*·diag(√λ*)·g_i + σ·h_i`.
pub fn sample(model: &SpikedModel, seed: u64) -> Mat<f64> {
    sample_with(model, &mut seeded(seed))
}

pub fn sample_with<R: Rng + ?Sized>(model: &SpikedModel, rng: &mut R) -> Mat<f64> {
    let (p, n, r) = (model.p, model.n, model.rank());
    let mut g = gaussian_matrix(r, n, rng);
    for k in 0..r {
        let s = model.eigvals_star[k].sqrt();
        for j in 0..n {
            g[(k, j)] *= s;
        }
    }
    let mut data = &model.u_star * &g;
    if model.sigma2 > 0.0 {
        let sigma = model.sigma2.sqrt();
        let h = gaussian_matrix(p, n, rng);
        data += sigma * h;
    }
    data
}

/// `(1/n)SSᵀ`.
pub fn sample_covariance(s: MatRef<'_, f64>) -> SymmetricMatrix {
    let n = s.ncols() as f64;
    SymmetricMatrix::symmetrized((s * s.transpose()) * (1.0 / n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    NgeP,
    NltP,
}

impl Branch {
    pub fn select(n: usize, p: usize) -> Self {
        if n >= p {
            Branch::NgeP
        } else {
            Branch::NltP
        }
    }
}

fn check_pca_spectrum(spec: &SpectralDecomposition, l: usize, r: usize, n: usize) -> Result<()> {
    if spec.ordering() != Ordering::ByValueDesc {
        return Err(Error::invalid("sample-covariance spectra must be ordered by value"));
    }
    if l == 0 || l > r || r >= n || r >= spec.dim() {
        return Err(Error::invalid(format!(
            "indices must satisfy 1 <= l <= r < min(n, p), got l={l}, r={r}, n={n}, p={}",
            spec.dim()
        )));
    }
    Ok(())
}

/// `λ_i` for `r < i ≤ n`, zero-padded past `min(n, p)`.
fn bulk(vals: &[f64], r: usize, n: usize) -> Vec<f64> {
    let p = vals.len();
    let mut out: Vec<f64> = vals[r..n.min(p)].to_vec();
    out.resize(n - r, 0.0);
    out
}

struct BulkSums {
    /// `Σ λ_i/(λ_l − λ_i)`
    a: f64,
    /// `Σ λ_i/(λ_l − λ_i)²`
    b: f64,
}

fn bulk_sums(lam: f64, bulk: &[f64], l: usize) -> Result<BulkSums> {
    let (mut a, mut b) = (0.0, 0.0);
    for &v in bulk {
        if collides(lam, v) {
            return Err(Error::degenerate(format!(
                "lambda_{l} = {lam} coincides with a bulk eigenvalue"
            )));
        }
        let d = lam - v;
        a += v / d;
        b += v / (d * d);
    }
    Ok(BulkSums { a, b })
}

/// Data-driven `c_l` with the branch chosen by `n ≥ p`.
pub fn debias_factor_pca(
    spec: &SpectralDecomposition,
    l: usize,
    r: usize,
    n: usize,
    sigma2: f64,
) -> Result<(f64, Branch)> {
    let branch = Branch::select(n, spec.dim());
    Ok((debias_factor_pca_branch(spec, l, r, n, sigma2, branch)?, branch))
}

/// `c_l` from an explicitly chosen branch formula.
pub fn debias_factor_pca_branch(
    spec: &SpectralDecomposition,
    l: usize,
    r: usize,
    n: usize,
    sigma2: f64,
    branch: Branch,
) -> Result<f64> {
    check_pca_spectrum(spec, l, r, n)?;
    let vals = spec.eigenvalues();
    let lam = vals[l - 1];
    let bulk = bulk(vals, r, n);
    let sums = bulk_sums(lam, &bulk, l)?;
    let denom = n as f64 + sums.a;
    if !(denom > 0.0) {
        return Err(Error::degenerate(format!("n + sum = {denom} is not positive")));
    }
    match branch {
        Branch::NgeP => Ok(lam / denom * sums.b),
        Branch::NltP => {
            let t = sigma2 * spec.dim() as f64 / n as f64;
            if !(lam > t) || collides(lam, t) {
                return Err(Error::degenerate(format!(
                    "lambda_{l} = {lam} must exceed sigma2*p/n = {t}"
                )));
            }
            let shifted: f64 = bulk.iter().map(|&v| (v - t) / (lam - v).powi(2)).sum();
            Ok(t / (lam - t) + lam / (lam - t) * (lam / denom) * shifted)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalEstimatePCA {
    pub l: usize,
    pub plugin: f64,
    pub correction_c: f64,
    pub factor: f64,
    pub debiased: f64,
    pub branch: Branch,
}

/// Estimates `aᵀu_l*` from `p×n` data `s`.
pub fn estimate_functional_pca(
    s: MatRef<'_, f64>,
    a: ColRef<'_, f64>,
    l: usize,
    r: usize,
    sigma2: f64,
) -> Result<FunctionalEstimatePCA> {
    check_unit(a, s.nrows())?;
    let spec = eigendecompose(&sample_covariance(s), Ordering::ByValueDesc)?;
    estimate_pca_from_spectrum(&spec, a, l, r, s.ncols(), sigma2)
}

pub fn estimate_pca_from_spectrum(
    spec: &SpectralDecomposition,
    a: ColRef<'_, f64>,
    l: usize,
    r: usize,
    n: usize,
    sigma2: f64,
) -> Result<FunctionalEstimatePCA> {
    check_unit(a, spec.dim())?;
    let (c, branch) = debias_factor_pca(spec, l, r, n, sigma2)?;
    let plugin = dot(a, spec.eigenvector(l - 1));
    let factor = (1.0 + c).sqrt();
    Ok(FunctionalEstimatePCA {
        l,
        plugin,
        correction_c: c,
        factor,
        debiased: factor * plugin,
        branch,
    })
}

/// Marchenko–Pastur approximation of `c_l`.
///
/// The population sums `(1/n)Σ_{r<i≤n} f(λ_i)` become `(p/n)∫ f dμ`: `μ`
/// carries mass `min(1, n/p)`, so the factor `p/n` restores the `min(n, p)/n`
/// share of nonzero bulk eigenvalues.
pub fn mp_debias(lambda_l: f64, sigma2: f64, n: usize, p: usize) -> Result<f64> {
    if n == 0 || p == 0 || !(sigma2 >= 0.0) {
        return Err(Error::invalid("mp_debias needs n, p >= 1 and sigma2 >= 0"));
    }
    if sigma2 == 0.0 {
        return Ok(0.0);
    }
    let law = NoiseSpectrumLaw::marchenko_pastur(sigma2, n, p)?;
    if law.contains(lambda_l) {
        return Err(Error::OutsideBulkRequired(format!(
            "lambda_l = {lambda_l} lies inside [{}, {}]",
            law.lower, law.upper
        )));
    }
    let w = p as f64 / n as f64;
    let lam = lambda_l;
    let i1 = w * law.integrate(|x| x / (lam - x));
    let denom = 1.0 + i1;
    if !(denom > 0.0) {
        return Err(Error::degenerate("1 + integral is not positive"));
    }
    match Branch::select(n, p) {
        Branch::NgeP => Ok(lam / denom * w * law.integrate(|x| x / (lam - x).powi(2))),
        Branch::NltP => {
            let t = sigma2 * w;
            if !(lam > t) {
                return Err(Error::degenerate(format!("lambda_l = {lam} must exceed sigma2*p/n = {t}")));
            }
            let i3 = w * law.integrate(|x| (x - t) / (lam - x).powi(2));
            Ok(t / (lam - t) + lam / (lam - t) * (lam / denom) * i3)
        }
    }
}

/// Estimate of `λ_l* + σ²`: `λ_l / (1 + (1/n)Σ_{r<i≤n} λ_i/(λ_l − λ_i))`.
pub fn shrink_eigenvalue(spec: &SpectralDecomposition, l: usize, r: usize, n: usize) -> Result<f64> {
    check_pca_spectrum(spec, l, r, n)?;
    let lam = spec.eigenvalues()[l - 1];
    let sums = bulk_sums(lam, &bulk(spec.eigenvalues(), r, n), l)?;
    let denom = 1.0 + sums.a / n as f64;
    if !(denom > 0.0) {
        return Err(Error::degenerate(format!("shrinkage denominator {denom} is not positive")));
    }
    Ok(lam / denom)
}

/// `σ̂²`: mean of `λ_i` over `r < i ≤ min(n, p)`, times `n/p` when `p > n`.
pub fn estimate_noise_pca(spec: &SpectralDecomposition, r: usize, n: usize) -> Result<f64> {
    let p = spec.dim();
    let m = n.min(p);
    if m <= r {
        return Err(Error::invalid(format!("min(n, p) = {m} must exceed r = {r}")));
    }
    let mut vals = spec.eigenvalues().to_vec();
    vals.sort_by(|a, b| b.total_cmp(a));
    let mean = vals[r..m].iter().sum::<f64>() / (m - r) as f64;
    Ok(if p > n { mean * n as f64 / p as f64 } else { mean })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleBiasDiagnosticsPCA {
    pub lambda: f64,
    pub beta_at_lambda_l: f64,
    /// `λ/(1 + β(λ))`
    pub shrunk: f64,
    /// `|shrunk − λ_l* − σ²|` when `λ_l*` is supplied.
    pub residual: Option<f64>,
}

/// Simulation-only `β(λ) = (1/n)tr[(1/n)S⊥ᵀ(λI − (1/n)S⊥S⊥ᵀ)⁻¹S⊥]` with
/// `S⊥ = U*⊥ᵀS`.
///
/// Equal to `(1/n)Σ_j μ_j/(λ − μ_j)` over the eigenvalues of `(1/n)S⊥S⊥ᵀ`,
/// which are the nonzero eigenvalues of the Gram matrix of `(I − U*U*ᵀ)S`.
pub fn beta_oracle(
    model: &SpikedModel,
    s: MatRef<'_, f64>,
    lambda: f64,
    lambda_star: Option<f64>,
) -> Result<OracleBiasDiagnosticsPCA> {
    if s.nrows() != model.p {
        return Err(Error::invalid("data dimension does not match the model"));
    }
    let n = s.ncols();
    let u = model.u_star();
    let perp = s - u * (u.transpose() * s);
    let gram = if n <= model.p {
        perp.transpose() * &perp
    } else {
        &perp * perp.transpose()
    };
    let mu = eigenvalues(&SymmetricMatrix::symmetrized(gram * (1.0 / n as f64)), Ordering::ByValueDesc)?;
    // what survives the projection of a spike-only sample is rounding
    let scale = s.norm_l2().powi(2) / n as f64;
    let floor = COLLISION_TOL * scale;
    let mut sum = 0.0;
    for &m in &mu {
        if m.abs() <= floor {
            continue;
        }
        if collides(lambda, m) {
            return Err(Error::degenerate(format!(
                "lambda = {lambda} is an eigenvalue of the orthogonal sample covariance"
            )));
        }
        sum += m / (lambda - m);
    }
    let beta = sum / n as f64;
    let denom = 1.0 + beta;
    if !(denom > 0.0) {
        return Err(Error::degenerate("1 + beta is not positive"));
    }
    let shrunk = lambda / denom;
    Ok(OracleBiasDiagnosticsPCA {
        lambda,
        beta_at_lambda_l: beta,
        shrunk,
        residual: lambda_star.map(|ls| (shrunk - ls - model.sigma2).abs()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryBoundsPCA {
    pub e_pca: f64,
    pub e_pca_bias: f64,
    pub noise_ok: bool,
    pub eigengap_ok: bool,
}

/// Error-bound terms and feasibility conditions (unit constants).
pub fn bounds_pca(
    model: &SpikedModel,
    a: ColRef<'_, f64>,
    l: usize,
    lambda_max_emp: f64,
) -> Result<TheoryBoundsPCA> {
    check_unit(a, model.p)?;
    if l == 0 || l > model.rank() {
        return Err(Error::invalid(format!("l = {l} outside 1..={}", model.rank())));
    }
    let n = model.n as f64;
    let p = model.p as f64;
    let r = model.rank() as f64;
    let s2 = model.sigma2;
    let lmax = model.lambda_max();
    let lam_l = model.eigvals_star[l - 1];
    let kappa = model.kappa();
    let gap = model.eigengap(l);
    let log_n = n.ln();
    let log_term = (n * kappa * lambda_max_emp.abs() / gap).ln().max(0.0);
    let align = model.functional(a, l).abs();

    let t1 = (lmax + s2) * (lam_l + s2) * r * log_n / (gap * gap * n) * align;
    let t2 = ((lmax + s2) * s2 * kappa * kappa * r / (lam_l * lam_l * n)).sqrt() * log_n * log_n;
    let cross: f64 = (1..=model.rank())
        .filter(|&k| k != l)
        .map(|k| model.functional(a, k).abs() / ((lam_l - model.eigvals_star[k - 1]).abs() * n.sqrt()))
        .sum();
    let t3 = cross * ((lam_l + s2) * (lmax + s2) * (kappa * kappa + r) * log_term).sqrt();
    let e_pca_bias = (lam_l + s2) * s2 * p / (lam_l * lam_l * n) * align;

    let ratio = p / n;
    let noise_level = lmax * (r / n).sqrt() + (lmax * s2 * ratio).sqrt() + s2 * (ratio + ratio.sqrt());
    Ok(TheoryBoundsPCA {
        e_pca: t1 + t2 + t3,
        e_pca_bias,
        noise_ok: noise_level <= model.lambda_min() / (log_n * log_n),
        eigengap_ok: gap > (lmax + s2) * (r / n).sqrt() * log_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::col_from_slice;
    use approx::assert_relative_eq;
    use faer::Col;
    use proptest::prelude::*;

    fn by_value(diag: &[f64]) -> SpectralDecomposition {
        eigendecompose(&SymmetricMatrix::from_diagonal(diag), Ordering::ByValueDesc).unwrap()
    }

    fn diag_frame(p: usize, r: usize) -> Mat<f64> {
        Mat::from_fn(p, r, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn noiseless_rank_one_lies_on_the_spike() {
        let model = SpikedModel::with_random_frame(20, 30, vec![4.0], 0.0, &mut seeded(1)).unwrap();
        let s = sample(&model, 2);
        let u = model.u_star().col(0);
        for j in 0..30 {
            let col = s.col(j);
            let proj = dot(u, col);
            let resid: f64 = (0..20).map(|i| (col[i] - proj * u[i]).powi(2)).sum::<f64>().sqrt();
            assert!(resid < 1e-9);
        }
    }

    #[test]
    fn empirical_covariance_converges() {
        let model = SpikedModel::with_random_frame(5, 50_000, vec![3.0, 1.5], 0.8, &mut seeded(3)).unwrap();
        let s = sample(&model, 4);
        let emp = sample_covariance(s.as_ref());
        let diff = emp.as_mat() - model.covariance().as_mat();
        let rel = diff.norm_l2() / model.covariance().as_mat().norm_l2();
        assert!(rel <= 0.05, "{rel}");
    }

    #[test]
    fn seeds_give_different_samples() {
        let model = SpikedModel::with_random_frame(6, 4, vec![2.0], 1.0, &mut seeded(5)).unwrap();
        assert_ne!(sample(&model, 1), sample(&model, 2));
        assert_eq!(sample(&model, 1), sample(&model, 1));
    }

    #[test]
    fn model_validation() {
        assert!(SpikedModel::new(4, 10, vec![1.0, 2.0], diag_frame(4, 2), 1.0).is_err());
        assert!(SpikedModel::new(4, 10, vec![1.0, -1.0], diag_frame(4, 2), 1.0).is_err());
        assert!(SpikedModel::new(4, 10, vec![2.0], diag_frame(3, 1), 1.0).is_err());
        let m = SpikedModel::new(4, 10, vec![6.0, 2.0], diag_frame(4, 2), 1.0).unwrap();
        assert_eq!(m.kappa(), 3.0);
        assert_eq!(m.eigengap(2), 4.0);
    }

    #[test]
    fn c_vanishes_without_bulk() {
        let spec = by_value(&[5.0, 0.0, 0.0]);
        let (c, branch) = debias_factor_pca(&spec, 1, 1, 10, 0.0).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(branch, Branch::NgeP);
    }

    #[test]
    fn c_direct_sum_n_ge_p() {
        let spec = by_value(&[1.0, 5.0, 0.5]);
        let (c, branch) = debias_factor_pca(&spec, 1, 1, 4, 1.0).unwrap();
        assert_eq!(branch, Branch::NgeP);
        let a = 1.0 / 4.0 + 0.5 / 4.5;
        let b = 1.0 / 16.0 + 0.5 / 20.25;
        assert_relative_eq!(c, 5.0 / (4.0 + a) * b, max_relative = 1e-14);
        assert_relative_eq!(c, 0.0999646, epsilon = 5e-8);
    }

    #[test]
    fn c_n_lt_p_flat_bulk() {
        // n = 2, p = 4, σ² = 1: σ²p/n = 2 and the single bulk value equals it
        let spec = by_value(&[10.0, 2.0, 0.0, 0.0]);
        let (c, branch) = debias_factor_pca(&spec, 1, 1, 2, 1.0).unwrap();
        assert_eq!(branch, Branch::NltP);
        assert_relative_eq!(c, 2.0 / 8.0, max_relative = 1e-14);
    }

    #[test]
    fn c_errors() {
        let spec = by_value(&[3.0, 3.0, 1.0]);
        assert!(matches!(debias_factor_pca(&spec, 1, 1, 5, 1.0), Err(Error::DegenerateSpectrum(_))));
        let spec = by_value(&[1.5, 0.5, 0.1, 0.0]);
        // σ²p/n = 2 > λ_1
        assert!(matches!(debias_factor_pca(&spec, 1, 1, 2, 1.0), Err(Error::DegenerateSpectrum(_))));
        assert!(matches!(debias_factor_pca(&spec, 2, 1, 3, 1.0), Err(Error::InvalidInput(_))));
        let by_mag = eigendecompose(&SymmetricMatrix::from_diagonal(&[3.0, 1.0]), Ordering::ByMagnitudeDesc).unwrap();
        assert!(debias_factor_pca(&by_mag, 1, 1, 5, 1.0).is_err());
    }

    /// `c(n<p formula) − c(n≥p formula) = t·r / ((λ_l − t)(n + A))` with
    /// `t = σ²p/n`, for any bulk of `n − r` values.
    fn branch_gap(vals: &[f64], l: usize, r: usize, n: usize, sigma2: f64) -> f64 {
        let lam = vals[l - 1];
        let t = sigma2 * vals.len() as f64 / n as f64;
        let a: f64 = bulk(vals, r, n).iter().map(|&v| v / (lam - v)).sum();
        t * r as f64 / ((lam - t) * (n as f64 + a))
    }

    #[test]
    fn branches_differ_by_closed_form_at_square_shape() {
        let model = SpikedModel::with_random_frame(100, 100, vec![8.0, 5.0], 1.0, &mut seeded(9)).unwrap();
        let spec = eigendecompose(&sample_covariance(sample(&model, 10).as_ref()), Ordering::ByValueDesc).unwrap();
        for l in 1..=2 {
            let ge = debias_factor_pca_branch(&spec, l, 2, 100, 1.0, Branch::NgeP).unwrap();
            let lt = debias_factor_pca_branch(&spec, l, 2, 100, 1.0, Branch::NltP).unwrap();
            let gap = branch_gap(spec.eigenvalues(), l, 2, 100, 1.0);
            assert_relative_eq!(lt - ge, gap, max_relative = 1e-9);
            // the gap is O(1/n), not zero
            assert!(gap > 0.0 && gap / ge < 0.05);
        }
    }

    proptest! {
        #[test]
        fn branch_gap_identity(
            bulk_vals in proptest::collection::vec(0.0f64..2.0, 3..12),
            spikes in proptest::collection::vec(3.0f64..20.0, 1..3),
            sigma2 in 0.05f64..0.4,
        ) {
            let mut vals = spikes.clone();
            vals.sort_by(|a, b| b.total_cmp(a));
            prop_assume!(vals.windows(2).all(|w| w[0] - w[1] > 1e-3));
            let r = vals.len();
            vals.extend(bulk_vals.iter());
            let n = vals.len();
            let spec = by_value(&vals);
            for l in 1..=r {
                let ge = debias_factor_pca_branch(&spec, l, r, n, sigma2, Branch::NgeP).unwrap();
                let lt = debias_factor_pca_branch(&spec, l, r, n, sigma2, Branch::NltP).unwrap();
                prop_assert!(ge >= 0.0);
                let gap = branch_gap(spec.eigenvalues(), l, r, n, sigma2);
                prop_assert!(((lt - ge) - gap).abs() <= 1e-10 * (1.0 + gap.abs() + ge.abs()));
            }
        }
    }

    #[test]
    fn mp_edges_and_trivia() {
        assert_eq!(mp_debias(5.0, 0.0, 10, 10).unwrap(), 0.0);
        assert!(matches!(mp_debias(2.0, 1.0, 100, 100), Err(Error::OutsideBulkRequired(_))));
        let c = mp_debias(30.0, 1.0, 800, 400).unwrap();
        assert!(c > 0.0 && c < 0.1);
        let c_small = mp_debias(30.0, 1e-6, 800, 400).unwrap();
        assert!(c_small < 1e-6);
        // n < p branch runs and is positive
        assert!(mp_debias(30.0, 1.0, 200, 400).unwrap() > 0.0);
    }

    #[test]
    fn mp_matches_data_driven_factor() {
        let (p, n) = (400, 800);
        let model = SpikedModel::with_random_frame(p, n, vec![20.0], 1.0, &mut seeded(11)).unwrap();
        let spec = eigendecompose(&sample_covariance(sample(&model, 12).as_ref()), Ordering::ByValueDesc).unwrap();
        let (c, _) = debias_factor_pca(&spec, 1, 1, n, 1.0).unwrap();
        let mp = mp_debias(spec.eigenvalues()[0], 1.0, n, p).unwrap();
        assert!(((c - mp) / c).abs() <= 0.15, "data {c} vs mp {mp}");
    }

    #[test]
    fn shrink_examples() {
        assert_eq!(shrink_eigenvalue(&by_value(&[5.0, 0.0, 0.0]), 1, 1, 3).unwrap(), 5.0);
        let spec = by_value(&[5.0, 1.0, 0.5, 0.0, 0.0]);
        let s = shrink_eigenvalue(&spec, 1, 1, 4).unwrap();
        assert_relative_eq!(s, 5.0 / (1.0 + (0.25 + 0.5 / 4.5) / 4.0), max_relative = 1e-14);
        assert_relative_eq!(s, 4.585987, epsilon = 5e-7);
    }

    #[test]
    fn noise_estimates() {
        let g = gaussian_matrix(100, 10_000, &mut seeded(13));
        let spec = eigendecompose(&sample_covariance(g.as_ref()), Ordering::ByValueDesc).unwrap();
        let s2 = estimate_noise_pca(&spec, 0, 10_000).unwrap();
        assert!((0.95..=1.05).contains(&s2), "{s2}");
        // p = 6 > n = 3, σ² = 0.5: flat bulk at σ²p/n = 1
        let flat = by_value(&[9.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(estimate_noise_pca(&flat, 1, 3).unwrap(), 0.5, max_relative = 1e-14);
        let zero = by_value(&[0.0; 4]);
        assert_eq!(estimate_noise_pca(&zero, 1, 10).unwrap(), 0.0);
        assert!(estimate_noise_pca(&zero, 4, 10).is_err());
    }

    #[test]
    fn beta_vanishes_on_the_spike() {
        let model = SpikedModel::with_random_frame(8, 20, vec![3.0], 0.0, &mut seeded(14)).unwrap();
        let s = sample(&model, 15);
        let d = beta_oracle(&model, s.as_ref(), 3.0, Some(3.0)).unwrap();
        assert_eq!(d.beta_at_lambda_l, 0.0);
        assert_eq!(d.shrunk, 3.0);
        assert_eq!(d.residual, Some(0.0));
    }

    #[test]
    fn beta_decreases_beyond_the_bulk() {
        let model = SpikedModel::with_random_frame(60, 90, vec![10.0], 1.0, &mut seeded(16)).unwrap();
        let s = sample(&model, 17);
        let (_, upper) = crate::laws::mp_edges(1.0, 90, 60);
        let mut prev = f64::INFINITY;
        for k in 1..40 {
            let lam = upper * 1.5 + k as f64 * 0.5;
            let b = beta_oracle(&model, s.as_ref(), lam, None).unwrap().beta_at_lambda_l;
            assert!(b > 0.0 && b < prev);
            prev = b;
        }
    }

    #[test]
    fn beta_matches_both_gram_orientations() {
        for &(p, n) in &[(30usize, 12usize), (12, 30)] {
            let model = SpikedModel::with_random_frame(p, n, vec![9.0], 1.0, &mut seeded(18)).unwrap();
            let s = sample(&model, 19);
            let uperp = crate::matrix::orthonormal_complement(model.u_star());
            let sp = uperp.transpose() * &s;
            let w = SymmetricMatrix::symmetrized((&sp * sp.transpose()) * (1.0 / n as f64));
            let mu = eigenvalues(&w, Ordering::ByValueDesc).unwrap();
            let lam = 25.0;
            let expected = mu.iter().map(|m| m / (lam - m)).sum::<f64>() / n as f64;
            let got = beta_oracle(&model, s.as_ref(), lam, None).unwrap().beta_at_lambda_l;
            assert_relative_eq!(got, expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn bounds_examples() {
        let model = SpikedModel::new(100, 100, vec![20.0, 10.0], diag_frame(100, 2), 1.0).unwrap();
        let a: Col<f64> = Col::from_fn(100, |i| if i == 0 { 1.0 } else { 0.0 });
        let b = bounds_pca(&model, a.as_ref(), 1, 21.0).unwrap();
        assert_relative_eq!(b.e_pca_bias, 0.0525, max_relative = 1e-14);

        let quiet = SpikedModel::new(100, 100, vec![20.0, 10.0], diag_frame(100, 2), 0.0).unwrap();
        assert_eq!(bounds_pca(&quiet, a.as_ref(), 1, 20.0).unwrap().e_pca_bias, 0.0);

        // r = 1: only T1 and T2
        let one = SpikedModel::new(100, 400, vec![20.0], diag_frame(100, 1), 1.0).unwrap();
        let mix = col_from_slice(&{
            let mut v = vec![0.0; 100];
            v[0] = 0.6;
            v[1] = 0.8;
            v
        });
        let b = bounds_pca(&one, mix.as_ref(), 1, 21.0).unwrap();
        let (n, ln) = (400.0f64, 400f64.ln());
        let t1 = 21.0 * 21.0 * ln / (400.0 * n) * 0.6;
        let t2 = (21.0 / (400.0 * n)).sqrt() * ln * ln;
        assert_relative_eq!(b.e_pca, t1 + t2, max_relative = 1e-13);
    }
}
