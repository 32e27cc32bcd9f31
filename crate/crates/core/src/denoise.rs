//! Matrix denoising: `M = M* + H` with `M* = U*Λ*U*ᵀ` of rank `r` and
//! symmetric Gaussian noise `H`.
//!
//! The de-biased estimate of `aᵀu_l*` rescales the plug-in `aᵀu_l` by
//! `√(1 + b_l)`, where `b_l = Σ_{r<i≤n} σ²/(λ_l − λ_i)²` uses only the
//! observed eigenvalues.

use faer::{Col, ColRef, Mat, MatRef};
use rand::Rng;

use crate::error::{Error, Result};
use crate::laws::NoiseSpectrumLaw;
use crate::matrix::{
    dot, eigendecompose, eigenvalues, ensure_orthonormal, Ordering, SpectralDecomposition,
    SymmetricMatrix,
};
use crate::rng::{random_orthonormal_frame, seeded, standard_normal};

/// Relative closeness at which two eigenvalues are treated as colliding.
pub const COLLISION_TOL: f64 = 1e-12;

/// Default multiplier `C` of the rank-estimation gap threshold `C·σ√n`.
pub const DEFAULT_RANK_GAP: f64 = 2.0;

/// Planted rank-`r` symmetric signal plus noise level.
#[derive(Clone, Debug)]
pub struct GroundTruthDenoising {
    n: usize,
    eigvals_star: Vec<f64>,
    u_star: Mat<f64>,
    sigma: f64,
}

impl GroundTruthDenoising {
    /// `eigvals_star` must be nonzero with non-increasing magnitude;
    /// `u_star` is `n×r` orthonormal.
    pub fn new(n: usize, eigvals_star: Vec<f64>, u_star: Mat<f64>, sigma: f64) -> Result<Self> {
        let r = eigvals_star.len();
        if r == 0 || r >= n {
            return Err(Error::invalid(format!("rank must satisfy 1 <= r < n, got r={r}, n={n}")));
        }
        if eigvals_star.iter().any(|&v| v == 0.0 || !v.is_finite()) {
            return Err(Error::invalid("planted eigenvalues must be finite and nonzero"));
        }
        if eigvals_star.windows(2).any(|w| w[0].abs() < w[1].abs()) {
            return Err(Error::invalid(
                "planted eigenvalues must be sorted by magnitude, largest first",
            ));
        }
        if u_star.nrows() != n || u_star.ncols() != r {
            return Err(Error::invalid(format!(
                "U* must be {n}x{r}, got {}x{}",
                u_star.nrows(),
                u_star.ncols()
            )));
        }
        ensure_orthonormal(u_star.as_ref())?;
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid("sigma must be finite and nonnegative"));
        }
        Ok(Self {
            n,
            eigvals_star,
            u_star,
            sigma,
        })
    }

    /// Model whose eigenvectors span a uniformly random `r`-dimensional subspace.
    pub fn with_random_frame<R: Rng + ?Sized>(
        n: usize,
        eigvals_star: Vec<f64>,
        sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let r = eigvals_star.len();
        if r == 0 || r >= n {
            return Err(Error::invalid(format!("rank must satisfy 1 <= r < n, got r={r}, n={n}")));
        }
        let u = random_orthonormal_frame(n, r, rng);
        Self::new(n, eigvals_star, u, sigma)
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

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigvals_star[0].abs()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigvals_star[self.rank() - 1].abs()
    }

    /// `κ = |λ_1*| / |λ_r*|`.
    pub fn kappa(&self) -> f64 {
        self.lambda_max() / self.lambda_min()
    }

    /// `Δ_l*`: distance from `λ_l*` to the other planted eigenvalues, or
    /// `λ_max*` when `r = 1`. `l` is 1-based.
    pub fn eigengap(&self, l: usize) -> f64 {
        eigengap(&self.eigvals_star, l)
    }

    /// `M* = U*Λ*U*ᵀ`.
    pub fn signal(&self) -> SymmetricMatrix {
        let n = self.n;
        let u = &self.u_star;
        let m = Mat::from_fn(n, n, |i, j| {
            (0..self.rank()).map(|k| self.eigvals_star[k] * u[(i, k)] * u[(j, k)]).sum()
        });
        SymmetricMatrix::symmetrized(m)
    }

    /// `aᵀu_l*` (1-based `l`).
    pub fn functional(&self, a: ColRef<'_, f64>, l: usize) -> f64 {
        dot(a, self.u_star.col(l - 1))
    }
}

pub(crate) fn eigengap(eigvals: &[f64], l: usize) -> f64 {
    let r = eigvals.len();
    if r == 1 {
        return eigvals[0].abs();
    }
    let target = eigvals[l - 1];
    eigvals
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != l - 1)
        .map(|(_, &v)| (target - v).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric noise with `H_ij = H_ji ~ N(0, σ²)` off the diagonal and
/// `H_ii ~ N(0, 2σ²)`.
pub fn generate_noise(n: usize, sigma: f64, seed: u64) -> SymmetricMatrix {
    generate_noise_with(n, sigma, &mut seeded(seed))
}

pub fn generate_noise_with<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> SymmetricMatrix {
    if sigma == 0.0 {
        return SymmetricMatrix::zeros(n);
    }
    let diag_sd = sigma * std::f64::consts::SQRT_2;
    let mut h = Mat::zeros(n, n);
    for j in 0..n {
        h[(j, j)] = diag_sd * standard_normal(rng);
        for i in (j + 1)..n {
            let v = sigma * standard_normal(rng);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    SymmetricMatrix::symmetrized(h)
}

/// `M = M* + H` for a fresh noise draw.
pub fn observe(model: &GroundTruthDenoising, seed: u64) -> SymmetricMatrix {
    observe_with(model, &mut seeded(seed)).0
}

/// Returns `(M, H)`.
pub fn observe_with<R: Rng + ?Sized>(
    model: &GroundTruthDenoising,
    rng: &mut R,
) -> (SymmetricMatrix, SymmetricMatrix) {
    let h = generate_noise_with(model.n, model.sigma, rng);
    let m = SymmetricMatrix::symmetrized(model.signal().as_mat() + h.as_mat());
    (m, h)
}

fn check_index(l: usize, r: usize, n: usize) -> Result<()> {
    if l == 0 || l > r || r >= n {
        return Err(Error::invalid(format!(
            "indices must satisfy 1 <= l <= r < n, got l={l}, r={r}, n={n}"
        )));
    }
    Ok(())
}

pub(crate) fn collides(a: f64, b: f64) -> bool {
    (a - b).abs() <= COLLISION_TOL * a.abs().max(b.abs()).max(1.0)
}

/// `b_l = Σ_{r<i≤n} σ²/(λ_l − λ_i)²` from a magnitude-ordered spectrum.
pub fn debias_factor_md(spec: &SpectralDecomposition, l: usize, r: usize, sigma: f64) -> Result<f64> {
    if spec.ordering() != Ordering::ByMagnitudeDesc {
        return Err(Error::invalid("denoising spectra must be ordered by magnitude"));
    }
    bulk_factor(spec.eigenvalues(), l, r, sigma)
}

fn bulk_factor(vals: &[f64], l: usize, r: usize, sigma: f64) -> Result<f64> {
    check_index(l, r, vals.len())?;
    let lam = vals[l - 1];
    let mut sum = 0.0;
    for (i, &v) in vals.iter().enumerate().skip(r) {
        if collides(lam, v) {
            return Err(Error::degenerate(format!(
                "lambda_{l} = {lam} coincides with bulk eigenvalue lambda_{} = {v}",
                i + 1
            )));
        }
        sum += 1.0 / (lam - v).powi(2);
    }
    Ok(sigma * sigma * sum)
}

/// Plug-in and de-biased estimates of `aᵀu_l*`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalEstimate {
    pub l: usize,
    pub plugin: f64,
    pub correction_b: f64,
    pub factor: f64,
    pub debiased: f64,
}

impl FunctionalEstimate {
    fn from_parts(l: usize, plugin: f64, correction_b: f64) -> Self {
        let factor = (1.0 + correction_b).sqrt();
        Self {
            l,
            plugin,
            correction_b,
            factor,
            debiased: factor * plugin,
        }
    }
}

pub(crate) fn check_unit(a: ColRef<'_, f64>, n: usize) -> Result<()> {
    if a.nrows() != n {
        return Err(Error::invalid(format!("a has length {}, expected {n}", a.nrows())));
    }
    let norm = dot(a, a).sqrt();
    if !((norm - 1.0).abs() <= 1e-9) {
        return Err(Error::invalid(format!("a must be a unit vector, |a| = {norm}")));
    }
    Ok(())
}

pub fn estimate_functional_md(
    m: &SymmetricMatrix,
    a: ColRef<'_, f64>,
    l: usize,
    r: usize,
    sigma: f64,
) -> Result<FunctionalEstimate> {
    check_unit(a, m.dim())?;
    check_index(l, r, m.dim())?;
    let spec = eigendecompose(m, Ordering::ByMagnitudeDesc)?;
    estimate_md_from_spectrum(&spec, a, l, r, sigma)
}

/// Same as [`estimate_functional_md`] for an existing decomposition.
pub fn estimate_md_from_spectrum(
    spec: &SpectralDecomposition,
    a: ColRef<'_, f64>,
    l: usize,
    r: usize,
    sigma: f64,
) -> Result<FunctionalEstimate> {
    check_unit(a, spec.dim())?;
    let b = debias_factor_md(spec, l, r, sigma)?;
    let plugin = dot(a, spec.eigenvector(l - 1));
    Ok(FunctionalEstimate::from_parts(l, plugin, b))
}

/// Bulk-edge noise estimate `σ̂ = |λ_{r+1}| / (2√n)`, from `‖H‖ ≈ 2σ√n`.
pub fn estimate_sigma_md(spec: &SpectralDecomposition, r: usize) -> Result<f64> {
    let n = spec.dim();
    if r >= n {
        return Err(Error::invalid(format!("rank {r} leaves no bulk eigenvalues (n = {n})")));
    }
    let mut mags: Vec<f64> = spec.eigenvalues().iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(mags[r] / (2.0 * (n as f64).sqrt()))
}

/// Semicircle-law limit of `b_l`:
/// `∫_{−2}^{2} √(4−t²) / (2π(x−t)²) dt` at `x = λ_l/(σ√n)`.
pub fn semicircle_b(lambda_l: f64, sigma: f64, n: usize) -> Result<f64> {
    if n == 0 || !(sigma >= 0.0) {
        return Err(Error::invalid("semicircle_b needs n >= 1 and sigma >= 0"));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    let x = (lambda_l / (sigma * (n as f64).sqrt())).abs();
    if !(x > 2.0 + 1e-6) {
        return Err(Error::OutsideBulkRequired(format!(
            "|lambda_l|/(sigma*sqrt(n)) = {x} must exceed 2"
        )));
    }
    let law = NoiseSpectrumLaw::semicircle(1.0, 1)?;
    Ok(law.integrate(|t| 1.0 / (x - t).powi(2)))
}

/// `γ(λ) = σ² tr[(λI − U*⊥ᵀ H U*⊥)⁻¹]` and, when `λ_l*` is given, the
/// residual `|λ − γ(λ) − λ_l*|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleBiasDiagnosticsMD {
    pub lambda: f64,
    pub gamma_at_lambda_l: f64,
    pub residual: Option<f64>,
}

/// Simulation-only: needs the planted frame and the noise draw.
///
/// The compression is never formed. With `P = I − U*U*ᵀ`, `PHP` has the
/// eigenvalues of `U*⊥ᵀHU*⊥` plus `r` exact zeros, so
/// `tr[(λI − U*⊥ᵀHU*⊥)⁻¹] = Σ_i 1/(λ − μ_i(PHP)) − r/λ`.
pub fn gamma_oracle(
    model: &GroundTruthDenoising,
    h: &SymmetricMatrix,
    lambda: f64,
    lambda_star: Option<f64>,
) -> Result<OracleBiasDiagnosticsMD> {
    let n = model.n;
    if h.dim() != n {
        return Err(Error::invalid("noise matrix dimension does not match the model"));
    }
    let r = model.rank();
    if lambda == 0.0 {
        return Err(Error::degenerate("resolvent at lambda = 0 is singular"));
    }
    let mu = eigenvalues(&project_out(h, model.u_star()), Ordering::ByValueDesc)?;
    let mut tr = -(r as f64) / lambda;
    for &m in &mu {
        if collides(lambda, m) && m.abs() > COLLISION_TOL {
            return Err(Error::degenerate(format!(
                "lambda = {lambda} is an eigenvalue of the compressed noise"
            )));
        }
        tr += 1.0 / (lambda - m);
    }
    let gamma = model.sigma * model.sigma * tr;
    Ok(OracleBiasDiagnosticsMD {
        lambda,
        gamma_at_lambda_l: gamma,
        residual: lambda_star.map(|s| (lambda - gamma - s).abs()),
    })
}

/// `PAP` with `P = I − UUᵀ`, in `O(n²r)`.
pub(crate) fn project_out(a: &SymmetricMatrix, u: MatRef<'_, f64>) -> SymmetricMatrix {
    let am = a.as_mat();
    let au = am * u; // n×r
    let utau = u.transpose() * &au; // r×r
    // PAP = A − U(AU)ᵀ − (AU)Uᵀ + U(UᵀAU)Uᵀ
    let mut out = am.to_owned();
    out -= u * au.transpose();
    out -= &au * u.transpose();
    out += u * &utau * u.transpose();
    SymmetricMatrix::symmetrized(out)
}

/// Largest `l` with `|λ_l| − |λ_{l+1}| > C·σ√n`, or 0 when no gap qualifies.
///
/// An absolute floor of `100·n·ε·|λ_1|` keeps rounding-level gaps from
/// counting when `σ = 0`.
pub fn estimate_rank(spec: &SpectralDecomposition, sigma: f64, c: f64) -> Result<usize> {
    if !(c > 0.0) {
        return Err(Error::invalid("rank threshold multiplier must be positive"));
    }
    let n = spec.dim();
    let mut mags: Vec<f64> = spec.eigenvalues().iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let floor = 100.0 * n as f64 * f64::EPSILON * mags[0];
    let threshold = (c * sigma * (n as f64).sqrt()).max(floor);
    Ok((1..n).rev().find(|&l| mags[l - 1] - mags[l] > threshold).unwrap_or(0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryBoundsMD {
    pub e_md: f64,
    pub e_md_bias: f64,
    pub eigengap_ok: bool,
}

/// Error-bound terms for target `l` and vector `a`.
///
/// `eigengap_ok` tests `Δ_l* > σ√r·log n` (unit constant).
pub fn bounds_md(
    model: &GroundTruthDenoising,
    a: ColRef<'_, f64>,
    l: usize,
    lambda_max_emp: f64,
) -> Result<TheoryBoundsMD> {
    check_unit(a, model.n)?;
    check_index(l, model.rank(), model.n)?;
    let n = model.n as f64;
    let r = model.rank() as f64;
    let sigma = model.sigma;
    let lam_l = model.eigvals_star[l - 1];
    let gap = model.eigengap(l);
    let log_n = n.ln();
    let log_term = (n * model.kappa() * lambda_max_emp.abs() / gap).ln().max(0.0);
    let align = model.functional(a, l).abs();

    let cross: f64 = (1..=model.rank())
        .filter(|&k| k != l)
        .map(|k| model.functional(a, k).abs() / (lam_l - model.eigvals_star[k - 1]).abs())
        .sum();
    let e_md = sigma * sigma * r * log_n / (gap * gap) * align
        + sigma * (r * log_term).sqrt() * cross
        + sigma * log_term.sqrt() / lam_l.abs();
    let e_md_bias = sigma * sigma * n / (lam_l * lam_l) * align;
    Ok(TheoryBoundsMD {
        e_md,
        e_md_bias,
        eigengap_ok: gap > sigma * r.sqrt() * log_n,
    })
}

/// Unit vector helper for callers holding plain slices.
pub fn col_from_slice(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn basis(n: usize, i: usize) -> Col<f64> {
        Col::from_fn(n, |j| if j == i { 1.0 } else { 0.0 })
    }

    fn diag_frame(n: usize, r: usize) -> Mat<f64> {
        Mat::from_fn(n, r, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn zero_sigma_noise_is_zero() {
        let h = generate_noise(6, 0.0, 1);
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn noise_is_reproducible_per_seed() {
        assert_eq!(generate_noise(5, 1.0, 3), generate_noise(5, 1.0, 3));
        assert_ne!(generate_noise(5, 1.0, 3), generate_noise(5, 1.0, 4));
    }

    #[test]
    fn off_diagonal_variance() {
        let n = 500;
        let h = generate_noise(n, 1.7, 99);
        let (mut s_off, mut c_off, mut s_diag) = (0.0, 0.0, 0.0);
        for j in 0..n {
            s_diag += h.get(j, j).powi(2);
            for i in (j + 1)..n {
                s_off += h.get(i, j).powi(2);
                c_off += 1.0;
            }
        }
        let var_off = s_off / c_off;
        assert!((var_off / 1.7f64.powi(2) - 1.0).abs() < 0.05, "{var_off}");
        let var_diag = s_diag / n as f64;
        assert!((var_diag / (2.0 * 1.7f64.powi(2)) - 1.0).abs() < 0.2, "{var_diag}");
    }

    #[test]
    fn observe_without_noise_is_signal() {
        let model =
            GroundTruthDenoising::with_random_frame(10, vec![5.0, -3.0], 0.0, &mut seeded(2)).unwrap();
        let m = observe(&model, 7);
        assert_eq!(m, model.signal());
        assert_eq!(eigendecompose(&m, Ordering::ByMagnitudeDesc).unwrap().eigenvalues().len(), 10);
    }

    #[test]
    fn rank_one_weyl() {
        let model =
            GroundTruthDenoising::with_random_frame(50, vec![100.0], 0.1, &mut seeded(4)).unwrap();
        let (m, h) = observe_with(&model, &mut seeded(5));
        let top = eigenvalues(&m, Ordering::ByMagnitudeDesc).unwrap()[0];
        // Weyl: |λ₁ − λ₁*| ≤ ‖H‖
        assert!((top - 100.0).abs() <= h.spectral_norm().unwrap() + 1e-12);
        assert!((top - 100.0).abs() < 5.0);
    }

    #[test]
    fn model_validation() {
        let u = diag_frame(4, 2);
        assert!(GroundTruthDenoising::new(4, vec![1.0, 2.0], u.clone(), 1.0).is_err());
        assert!(GroundTruthDenoising::new(4, vec![2.0, 0.0], u.clone(), 1.0).is_err());
        assert!(GroundTruthDenoising::new(2, vec![2.0, 1.0], diag_frame(2, 2), 1.0).is_err());
        assert!(GroundTruthDenoising::new(4, vec![-2.0, 1.0], Mat::from_fn(4, 2, |_, _| 0.5), 1.0).is_err());
        let m = GroundTruthDenoising::new(4, vec![-2.0, 1.0], u, 1.0).unwrap();
        assert_eq!(m.kappa(), 2.0);
        assert_eq!(m.eigengap(1), 3.0);
        let one = GroundTruthDenoising::new(4, vec![7.0], diag_frame(4, 1), 1.0).unwrap();
        assert_eq!(one.eigengap(1), 7.0);
    }

    #[test]
    fn debias_factor_direct_sum() {
        let spec = eigendecompose(
            &SymmetricMatrix::from_diagonal(&[1.0, -0.5, 10.0]),
            Ordering::ByMagnitudeDesc,
        )
        .unwrap();
        let b = debias_factor_md(&spec, 1, 1, 1.0).unwrap();
        assert_relative_eq!(b, 1.0 / 81.0 + 1.0 / 110.25, max_relative = 1e-14);
        assert_relative_eq!(b, 0.0214160, epsilon = 5e-8);
        assert_eq!(debias_factor_md(&spec, 1, 1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn debias_factor_vanishes_for_huge_signal() {
        let spec = eigendecompose(
            &SymmetricMatrix::from_diagonal(&[1e9, 1.0, -0.5]),
            Ordering::ByMagnitudeDesc,
        )
        .unwrap();
        let b = debias_factor_md(&spec, 1, 1, 1.0).unwrap();
        assert!(b < 1e-17);
        assert!(((1.0 + b).sqrt() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn debias_factor_errors() {
        let spec = eigendecompose(&SymmetricMatrix::from_diagonal(&[3.0, 3.0, 1.0]), Ordering::ByMagnitudeDesc)
            .unwrap();
        assert!(matches!(debias_factor_md(&spec, 1, 1, 1.0), Err(Error::DegenerateSpectrum(_))));
        assert!(matches!(debias_factor_md(&spec, 2, 1, 1.0), Err(Error::InvalidInput(_))));
        assert!(matches!(debias_factor_md(&spec, 0, 1, 1.0), Err(Error::InvalidInput(_))));
        let by_value =
            eigendecompose(&SymmetricMatrix::from_diagonal(&[3.0, 1.0]), Ordering::ByValueDesc).unwrap();
        assert!(debias_factor_md(&by_value, 1, 1, 1.0).is_err());
    }

    #[test]
    fn noiseless_estimates_are_exact() {
        let model =
            GroundTruthDenoising::with_random_frame(12, vec![4.0, -2.0, 1.0], 0.0, &mut seeded(8)).unwrap();
        let m = observe(&model, 1);
        for l in 1..=3 {
            let a = model.u_star().col(l - 1).to_owned();
            let est = estimate_functional_md(&m, a.as_ref(), l, 3, 0.0).unwrap();
            assert!((est.plugin.abs() - 1.0).abs() < 1e-12);
            assert!(crate::dist(est.plugin, model.functional(a.as_ref(), l)).value() < 1e-12);
            assert_eq!(est.debiased, est.plugin);
            assert_eq!(est.correction_b, 0.0);
            for k in (1..=3).filter(|&k| k != l) {
                let ak = model.u_star().col(k - 1).to_owned();
                let other = estimate_functional_md(&m, ak.as_ref(), l, 3, 0.0).unwrap();
                assert!(other.plugin.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn estimate_rejects_non_unit() {
        let m = SymmetricMatrix::from_diagonal(&[3.0, 1.0, 0.5]);
        let a = col_from_slice(&[1.0, 1.0, 0.0]);
        assert!(matches!(estimate_functional_md(&m, a.as_ref(), 1, 1, 1.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn debiased_ratio_is_exact() {
        let model =
            GroundTruthDenoising::with_random_frame(60, vec![30.0, 20.0], 1.0, &mut seeded(12)).unwrap();
        let m = observe(&model, 3);
        let a = crate::rng::random_unit_vector(60, &mut seeded(13));
        for l in 1..=2 {
            let est = estimate_functional_md(&m, a.as_ref(), l, 2, 1.0).unwrap();
            assert_eq!(est.debiased, (1.0 + est.correction_b).sqrt() * est.plugin);
            assert!(est.factor >= 1.0 && est.correction_b >= 0.0);
        }
    }

    #[test]
    fn semicircle_errors_inside_bulk() {
        assert!(matches!(semicircle_b(2.0, 1.0, 1), Err(Error::OutsideBulkRequired(_))));
        assert!(matches!(semicircle_b(-1.0, 0.5, 4), Err(Error::OutsideBulkRequired(_))));
        assert_eq!(semicircle_b(5.0, 0.0, 10).unwrap(), 0.0);
    }

    #[test]
    fn semicircle_decays() {
        let a = semicircle_b(10.0, 1.0, 1).unwrap();
        let b = semicircle_b(100.0, 1.0, 1).unwrap();
        let c = semicircle_b(1e4, 1.0, 1).unwrap();
        assert!(a > b && b > c && c < 1e-7);
    }

    #[test]
    fn gamma_zero_noise_matrix() {
        let model = GroundTruthDenoising::with_random_frame(9, vec![5.0, 3.0], 0.7, &mut seeded(1)).unwrap();
        let h = SymmetricMatrix::zeros(9);
        let g = gamma_oracle(&model, &h, 4.0, Some(5.0)).unwrap();
        assert_relative_eq!(g.gamma_at_lambda_l, 0.49 * 7.0 / 4.0, max_relative = 1e-12);
        assert_relative_eq!(g.residual.unwrap(), (4.0 - g.gamma_at_lambda_l - 5.0).abs());
        let quiet = GroundTruthDenoising::with_random_frame(9, vec![5.0], 0.0, &mut seeded(1)).unwrap();
        let h = generate_noise(9, 1.0, 2);
        assert_eq!(gamma_oracle(&quiet, &h, 6.0, None).unwrap().gamma_at_lambda_l, 0.0);
    }

    #[test]
    fn gamma_matches_explicit_compression() {
        let model = GroundTruthDenoising::with_random_frame(15, vec![9.0, -6.0], 1.3, &mut seeded(21)).unwrap();
        let h = generate_noise(15, 1.3, 22);
        let uperp = crate::matrix::orthonormal_complement(model.u_star());
        let comp = h.compress(uperp.as_ref()).unwrap();
        let mu = eigenvalues(&comp, Ordering::ByValueDesc).unwrap();
        let lambda = 11.0;
        let expected: f64 = 1.69 * mu.iter().map(|m| 1.0 / (lambda - m)).sum::<f64>();
        let got = gamma_oracle(&model, &h, lambda, None).unwrap().gamma_at_lambda_l;
        assert_relative_eq!(got, expected, max_relative = 1e-10);
    }

    #[test]
    fn gamma_singular_resolvent() {
        let model = GroundTruthDenoising::new(3, vec![5.0], diag_frame(3, 1), 1.0).unwrap();
        let h = SymmetricMatrix::from_diagonal(&[0.0, 2.0, -1.0]);
        assert!(matches!(gamma_oracle(&model, &h, 2.0, None), Err(Error::DegenerateSpectrum(_))));
    }

    fn spectrum_with_magnitudes(mags: &[f64]) -> SpectralDecomposition {
        eigendecompose(&SymmetricMatrix::from_diagonal(mags), Ordering::ByMagnitudeDesc).unwrap()
    }

    #[test]
    fn rank_estimation_examples() {
        let spec = spectrum_with_magnitudes(&[100.0, -50.0, 3.0, -2.9, 2.5]);
        let sigma = 2.0 / 5f64.sqrt(); // σ√n = 2
        assert_eq!(estimate_rank(&spec, sigma, DEFAULT_RANK_GAP).unwrap(), 2);
        let flat = spectrum_with_magnitudes(&[3.0, 2.9, 2.5, 2.0]);
        assert_eq!(estimate_rank(&flat, 1.0, 2.0).unwrap(), 0);
        let model = GroundTruthDenoising::with_random_frame(30, vec![8.0], 0.0, &mut seeded(3)).unwrap();
        let spec = eigendecompose(&observe(&model, 0), Ordering::ByMagnitudeDesc).unwrap();
        assert_eq!(estimate_rank(&spec, 0.0, 2.0).unwrap(), 1);
        assert!(estimate_rank(&spec, 1.0, 0.0).is_err());
    }

    #[test]
    fn bounds_examples() {
        let n = 100;
        let model = GroundTruthDenoising::new(n, vec![20.0, 10.0], diag_frame(n, 2), 1.0).unwrap();
        let a = basis(n, 0);
        let b = bounds_md(&model, a.as_ref(), 1, 20.0).unwrap();
        assert_relative_eq!(b.e_md_bias, 0.25, max_relative = 1e-14);

        // a ⟂ U*: only the last term survives
        let a_perp = basis(n, 5);
        let b = bounds_md(&model, a_perp.as_ref(), 1, 20.0).unwrap();
        let log_term = (n as f64 * 2.0 * 20.0 / 10.0).ln();
        assert_relative_eq!(b.e_md, log_term.sqrt() / 20.0, max_relative = 1e-14);
        assert_eq!(b.e_md_bias, 0.0);

        // r = 1: no cross-term even when a has weight on other directions
        let one = GroundTruthDenoising::new(n, vec![20.0], diag_frame(n, 1), 1.0).unwrap();
        let mix = col_from_slice(&{
            let mut v = vec![0.0; n];
            v[0] = 0.6;
            v[1] = 0.8;
            v
        });
        let b = bounds_md(&one, mix.as_ref(), 1, 20.0).unwrap();
        let log_n = (n as f64).ln();
        let log_term = (n as f64 * 1.0 * 20.0 / 20.0).ln();
        let expected = log_n / 400.0 * 0.6 + log_term.sqrt() / 20.0;
        assert_relative_eq!(b.e_md, expected, max_relative = 1e-14);
        assert!(b.eigengap_ok);
    }
}
