//! Limiting bulk spectra of the two noise models.
//!
//! * Semicircle: eigenvalues of the `n×n` symmetric Gaussian noise matrix with
//!   entry variance `σ²` spread over `[−2σ√n, 2σ√n]` with density
//!   `√(4σ²n − λ²) / (2πσ²n)`.
//! * Marchenko–Pastur: eigenvalues of `(1/n)SSᵀ` for `p×n` pure noise `S`
//!   with entry variance `σ²`, density
//!   `n√((λ₊−λ)(λ−λ₋)) / (2πσ²pλ)` on `[λ₋, λ₊]`, `λ± = σ²(1 ± √(p/n))²`.
//!   Its continuous part has mass `min(1, n/p)`; the rest sits at zero.
//!
//! Integrals against either law use the substitution
//! `λ = c + h·cos φ` (`c`, `h` the centre and half-width of the support),
//! which removes the square-root endpoint behaviour before the
//! double-exponential rule is applied.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Requested absolute accuracy of every law integral.
pub const QUAD_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LawKind {
    Semicircle,
    MarchenkoPastur,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpectrumLaw {
    pub kind: LawKind,
    /// Noise standard deviation `σ`.
    pub sigma: f64,
    /// Matrix dimension (semicircle) or sample count (MP).
    pub n: usize,
    /// Ambient dimension; MP only.
    pub p: Option<usize>,
    pub lower: f64,
    pub upper: f64,
}

impl NoiseSpectrumLaw {
    pub fn semicircle(sigma: f64, n: usize) -> Result<Self> {
        if !(sigma > 0.0) || n == 0 {
            return Err(Error::invalid("semicircle law needs sigma > 0 and n >= 1"));
        }
        let edge = 2.0 * sigma * (n as f64).sqrt();
        Ok(Self {
            kind: LawKind::Semicircle,
            sigma,
            n,
            p: None,
            lower: -edge,
            upper: edge,
        })
    }

    pub fn marchenko_pastur(sigma2: f64, n: usize, p: usize) -> Result<Self> {
        if !(sigma2 > 0.0) || n == 0 || p == 0 {
            return Err(Error::invalid(
                "Marchenko-Pastur law needs sigma2 > 0, n >= 1 and p >= 1",
            ));
        }
        let (lower, upper) = mp_edges(sigma2, n, p);
        Ok(Self {
            kind: LawKind::MarchenkoPastur,
            sigma: sigma2.sqrt(),
            n,
            p: Some(p),
            lower,
            upper,
        })
    }

    pub fn edges(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// Density (continuous part) at `x`; zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        let root = ((self.upper - x) * (x - self.lower)).max(0.0).sqrt();
        match self.kind {
            LawKind::Semicircle => root / (2.0 * PI * self.sigma2() * self.n as f64),
            LawKind::MarchenkoPastur => {
                let p = self.p.unwrap_or(1) as f64;
                if x <= 0.0 {
                    return 0.0;
                }
                self.n as f64 * root / (2.0 * PI * self.sigma2() * p * x)
            }
        }
    }

    /// `∫ f(λ) μ(dλ)` over the continuous part of the law.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let c = 0.5 * (self.upper + self.lower);
        let h = 0.5 * (self.upper - self.lower);
        if h <= 0.0 {
            return 0.0;
        }
        let scale = match self.kind {
            LawKind::Semicircle => 1.0 / (2.0 * PI * self.sigma2() * self.n as f64),
            LawKind::MarchenkoPastur => {
                self.n as f64 / (2.0 * PI * self.sigma2() * self.p.unwrap_or(1) as f64)
            }
        };
        let kind = self.kind;
        let integrand = |phi: f64| {
            let (s, co) = phi.sin_cos();
            let lam = c + h * co;
            let weight = h * h * s * s;
            let v = match kind {
                LawKind::Semicircle => f(lam) * weight,
                LawKind::MarchenkoPastur => f(lam) * weight / lam,
            };
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        scale * quadrature::integrate(integrand, 0.0, PI, QUAD_TOL * 1e-2).integral
    }

    /// Mass of the continuous part: 1 for the semicircle, `min(1, n/p)` for MP.
    pub fn total_mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }
}

/// `λ± = σ²(1 ± √(p/n))²`.
pub fn mp_edges(sigma2: f64, n: usize, p: usize) -> (f64, f64) {
    let y = (p as f64 / n as f64).sqrt();
    (sigma2 * (1.0 - y).powi(2), sigma2 * (1.0 + y).powi(2))
}
