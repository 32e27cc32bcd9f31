//! Exact eigenvector/eigenvalue identities relating an eigenpair `(λ_l, u_l)`
//! of a symmetric `M` to an arbitrary orthonormal frame `Q` and its
//! complement `Q⊥`. Each verifier evaluates both sides numerically and
//! reports the gaps; they serve as oracles in property tests.
//!
//! Eigenpairs are indexed by 1-based `l` in decreasing order of value.

use faer::{Col, ColRef, Mat, MatRef};

use crate::error::{Error, Result};
use crate::matrix::{
    dot, eigendecompose, ensure_orthonormal, norm2, orthonormal_complement, Ordering,
    SymmetricMatrix,
};

/// Resolvents with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// `u_l = u_parallel·cos θ + u_perp·sin θ` with `u_parallel ∈ span(Q)` and
/// `u_perp ∈ span(Q⊥)`. When `sin θ = 0`, `u_perp` is the zero vector.
#[derive(Clone, Debug)]
pub struct AngleDecomposition {
    pub q: Mat<f64>,
    pub q_perp: Mat<f64>,
    pub cos2_theta: f64,
    /// `‖Q⊥ᵀu‖`, computed directly rather than as `√(1 − cos²θ)`.
    pub sin_theta: f64,
    pub u_parallel: Col<f64>,
    pub u_perp: Col<f64>,
}

impl AngleDecomposition {
    /// Splits the unit vector `u` along `span(Q)` and its complement.
    pub fn new(q: Mat<f64>, q_perp: Mat<f64>, u: ColRef<'_, f64>) -> Self {
        let coef = q.transpose() * u;
        let par = &q * &coef;
        let perp = Col::from_fn(u.nrows(), |i| u[i] - par[i]);
        let cos = norm2(coef.as_ref());
        let sin = norm2(perp.as_ref());
        let unit = |v: &Col<f64>, len: f64| {
            if len > 0.0 {
                Col::from_fn(v.nrows(), |i| v[i] / len)
            } else {
                Col::zeros(v.nrows())
            }
        };
        Self {
            cos2_theta: (cos * cos).min(1.0),
            sin_theta: sin,
            u_parallel: unit(&par, cos),
            u_perp: unit(&perp, sin),
            q,
            q_perp,
        }
    }

    pub fn cos_theta(&self) -> f64 {
        self.cos2_theta.sqrt()
    }

    /// `u_parallel·cos θ + u_perp·sin θ`.
    pub fn reconstruct(&self) -> Col<f64> {
        let (c, s) = (self.cos_theta(), self.sin_theta);
        Col::from_fn(self.u_parallel.nrows(), |i| c * self.u_parallel[i] + s * self.u_perp[i])
    }

    /// Largest deviation of `[Q, Q⊥]ᵀ[Q, Q⊥]` from the identity.
    pub fn frame_defect(&self) -> f64 {
        let n = self.q.nrows();
        let k = self.q.ncols();
        let full = Mat::from_fn(n, n, |i, j| if j < k { self.q[(i, j)] } else { self.q_perp[(i, j - k)] });
        crate::matrix::orthonormality_defect(full.as_ref())
    }
}

#[derive(Clone, Debug)]
pub struct VectorMasterReport {
    pub cos2_direct: f64,
    pub cos2_formula: f64,
    pub cos2_gap: f64,
    pub lambda_gap: f64,
    /// Distance between the direct and formula `u_perp`, minimised over sign.
    pub u_perp_gap: f64,
    pub decomposition: AngleDecomposition,
}

#[derive(Clone, Debug)]
pub struct GeneralMasterReport {
    pub cos2_direct: f64,
    pub cos2_formula: f64,
    pub cos2_gap: f64,
    /// `‖(λI − QᵀMQ)Qᵀu_∥ − QᵀMQ⊥(λI − Q⊥ᵀMQ⊥)⁻¹Q⊥ᵀMu_∥‖`
    pub identity_residual: f64,
    pub decomposition: AngleDecomposition,
}

/// Inverse of the symmetric `λI − A` through its eigendecomposition.
struct Resolvent {
    vectors: Mat<f64>,
    inv: Vec<f64>,
}

impl Resolvent {
    fn new(lambda: f64, a: MatRef<'_, f64>, what: &str) -> Result<Self> {
        let k = a.nrows();
        let shifted = Mat::from_fn(k, k, |i, j| if i == j { lambda - a[(i, j)] } else { -a[(i, j)] });
        let spec = eigendecompose(&SymmetricMatrix::symmetrized(shifted), Ordering::ByMagnitudeDesc)?;
        let vals = spec.eigenvalues();
        let (big, small) = (vals[0].abs(), vals[k - 1].abs());
        if !(small > 0.0) || big / small >= MAX_CONDITION {
            return Err(Error::degenerate(format!(
                "{what} is near-singular (condition number {:.3e})",
                big / small
            )));
        }
        Ok(Self {
            vectors: spec.eigenvectors().to_owned(),
            inv: vals.iter().map(|v| 1.0 / v).collect(),
        })
    }

    fn solve(&self, b: ColRef<'_, f64>) -> Col<f64> {
        let mut y = self.vectors.transpose() * b;
        for (i, s) in self.inv.iter().enumerate() {
            y[i] *= s;
        }
        &self.vectors * y
    }
}

fn eigenpair(m: &SymmetricMatrix, l: usize) -> Result<(f64, Col<f64>)> {
    if l == 0 || l > m.dim() {
        return Err(Error::invalid(format!("l = {l} outside 1..={}", m.dim())));
    }
    let spec = eigendecompose(m, Ordering::ByValueDesc)?;
    Ok((spec.eigenvalues()[l - 1], spec.eigenvector(l - 1).to_owned()))
}

/// Rank-one identities for the unit vector `q`:
/// `cos²θ = 1/(1 + ‖w‖²)`, `λ_l = qᵀMq + (q⊥ᵀMq)ᵀw` and
/// `u_⊥ = ±q⊥w/‖w‖`, where `w = (λ_l I − q⊥ᵀMq⊥)⁻¹q⊥ᵀMq`.
pub fn verify_vector_master(m: &SymmetricMatrix, q: ColRef<'_, f64>, l: usize) -> Result<VectorMasterReport> {
    let n = m.dim();
    if q.nrows() != n || n < 2 {
        return Err(Error::invalid("q must have length n >= 2"));
    }
    if (norm2(q) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("q must be a unit vector"));
    }
    let (lambda, u) = eigenpair(m, l)?;
    let q_mat = q.as_mat().to_owned();
    let q_perp = orthonormal_complement(q_mat.as_ref());
    let mm = m.as_mat();
    let mq = mm * q;
    let b = q_perp.transpose() * &mq;
    let inner = q_perp.transpose() * mm * &q_perp;
    let w = Resolvent::new(lambda, inner.as_ref(), "lambda_l I - q_perp' M q_perp")?.solve(b.as_ref());
    let w_norm = norm2(w.as_ref());

    let decomposition = AngleDecomposition::new(q_mat, q_perp, u.as_ref());
    let cos2_direct = dot(q, u.as_ref()).powi(2);
    let cos2_formula = 1.0 / (1.0 + w_norm * w_norm);
    let lambda_formula = dot(q, mq.as_ref()) + dot(b.as_ref(), w.as_ref());

    // below this, u_perp is a normalised rounding residual with no direction
    let u_perp_gap = if decomposition.sin_theta > 1e-8 {
        let formula = &decomposition.q_perp * &w;
        let direct = &decomposition.u_perp;
        let (mut plus, mut minus) = (0.0f64, 0.0f64);
        for i in 0..n {
            let f = formula[i] / w_norm;
            plus = plus.max((direct[i] - f).abs());
            minus = minus.max((direct[i] + f).abs());
        }
        plus.min(minus)
    } else {
        (decomposition.sin_theta - w_norm / (1.0 + w_norm * w_norm).sqrt()).abs()
    };

    Ok(VectorMasterReport {
        cos2_direct,
        cos2_formula,
        cos2_gap: (cos2_direct - cos2_formula).abs(),
        lambda_gap: (lambda - lambda_formula).abs(),
        u_perp_gap,
        decomposition,
    })
}

/// Frame identities for an `n×k` orthonormal `Q`. Only the `Q⊥` resolvent
/// is inverted; `λI − QᵀMQ` is applied forwards and may be singular, as it
/// is whenever `u_l ∈ span(Q)`.
///
/// `cos²θ = ‖Qᵀu_l‖² = 1/(1 + ‖(λI − Q⊥ᵀMQ⊥)⁻¹Q⊥ᵀMu_∥‖²)` and
/// `(λI − QᵀMQ)Qᵀu_∥ = QᵀMQ⊥(λI − Q⊥ᵀMQ⊥)⁻¹Q⊥ᵀMu_∥`.
pub fn verify_general_master(m: &SymmetricMatrix, q: MatRef<'_, f64>, l: usize) -> Result<GeneralMasterReport> {
    let n = m.dim();
    let k = q.ncols();
    if q.nrows() != n || k == 0 || k >= n {
        return Err(Error::invalid(format!("Q must be n x k with 1 <= k < n, got {}x{k}", q.nrows())));
    }
    ensure_orthonormal(q)?;
    let (lambda, u) = eigenpair(m, l)?;
    let q_perp = orthonormal_complement(q);
    let decomposition = AngleDecomposition::new(q.to_owned(), q_perp, u.as_ref());
    if decomposition.cos2_theta <= 1e-24 {
        return Err(Error::degenerate("u_l is orthogonal to span(Q)"));
    }
    let q_perp = &decomposition.q_perp;
    let mm = m.as_mat();
    let u_par = &decomposition.u_parallel;

    let perp_res = Resolvent::new(lambda, (q_perp.transpose() * mm * q_perp).as_ref(), "lambda I - Q_perp' M Q_perp")?;
    let par_block = q.transpose() * mm * q;

    let z = perp_res.solve((q_perp.transpose() * (mm * u_par)).as_ref());
    let z_norm = norm2(z.as_ref());
    let cos2_formula = 1.0 / (1.0 + z_norm * z_norm);

    let alpha = q.transpose() * u_par;
    let lhs = Col::from_fn(k, |i| lambda * alpha[i]) - &par_block * &alpha;
    let rhs = q.transpose() * mm * (q_perp * &z);
    let diff = Col::from_fn(k, |i| lhs[i] - rhs[i]);

    Ok(GeneralMasterReport {
        cos2_direct: decomposition.cos2_theta,
        cos2_formula,
        cos2_gap: (decomposition.cos2_theta - cos2_formula).abs(),
        identity_residual: norm2(diff.as_ref()),
        decomposition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_orthonormal_frame, random_symmetric, random_unit_vector, seeded};

    #[test]
    fn eigenvector_as_q() {
        let m = random_symmetric(12, &mut seeded(1));
        let (lambda, u) = eigenpair(&m, 3).unwrap();
        let rep = verify_vector_master(&m, u.as_ref(), 3).unwrap();
        assert!((rep.cos2_formula - 1.0).abs() < 1e-12);
        assert!((rep.cos2_direct - 1.0).abs() < 1e-12);
        let quad = dot(u.as_ref(), m.matvec(u.as_ref()).as_ref());
        assert!((quad - lambda).abs() < 1e-10);
        assert!(rep.lambda_gap < 1e-10 && rep.u_perp_gap < 1e-10);
    }

    #[test]
    fn random_vector_identities() {
        let mut rng = seeded(2);
        let m = random_symmetric(30, &mut rng);
        let tol = 1e-8 * (1.0 + m.spectral_norm().unwrap());
        for l in [1, 7, 30] {
            let q = random_unit_vector(30, &mut rng);
            let rep = verify_vector_master(&m, q.as_ref(), l).unwrap();
            assert!(rep.cos2_gap <= tol, "{}", rep.cos2_gap);
            assert!(rep.lambda_gap <= tol, "{}", rep.lambda_gap);
            assert!(rep.u_perp_gap <= tol, "{}", rep.u_perp_gap);
            let (_, u) = eigenpair(&m, l).unwrap();
            let rec = rep.decomposition.reconstruct();
            let err = (0..30).map(|i| (rec[i] - u[i]).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8);
            assert!(rep.decomposition.frame_defect() < 1e-9);
        }
    }

    #[test]
    fn orthogonal_q_hits_singular_resolvent() {
        // q ⟂ u_1 and λ_1 stays in the compressed spectrum
        let m = SymmetricMatrix::from_diagonal(&[3.0, 2.0, 1.0]);
        let q = Col::from_fn(3, |i| if i == 1 { 1.0 } else { 0.0 });
        assert!(matches!(verify_vector_master(&m, q.as_ref(), 1), Err(Error::DegenerateSpectrum(_))));
    }

    #[test]
    fn invariant_subspace_frame() {
        let m = random_symmetric(20, &mut seeded(3));
        let spec = eigendecompose(&m, Ordering::ByValueDesc).unwrap();
        let q = spec.eigenvectors().subcols(0, 4).to_owned();
        let rep = verify_general_master(&m, q.as_ref(), 2).unwrap();
        assert!((rep.cos2_direct - 1.0).abs() < 1e-12);
        assert!((rep.cos2_formula - 1.0).abs() < 1e-12);
        assert!(rep.identity_residual < 1e-10);
    }

    #[test]
    fn random_frame_identities() {
        let mut rng = seeded(4);
        let m = random_symmetric(40, &mut rng);
        let tol = 1e-8 * (1.0 + m.spectral_norm().unwrap());
        let q = random_orthonormal_frame(40, 5, &mut rng);
        for l in [1, 13, 40] {
            let rep = verify_general_master(&m, q.as_ref(), l).unwrap();
            assert!(rep.cos2_gap <= tol, "{}", rep.cos2_gap);
            assert!(rep.identity_residual <= tol, "{}", rep.identity_residual);
        }
    }

    #[test]
    fn complement_frame_matches_vector_case() {
        let mut rng = seeded(5);
        let m = random_symmetric(25, &mut rng);
        let q = random_unit_vector(25, &mut rng);
        let q_perp = orthonormal_complement(q.as_mat());
        for l in [1, 12] {
            let vector = verify_vector_master(&m, q.as_ref(), l).unwrap();
            let general = verify_general_master(&m, q_perp.as_ref(), l).unwrap();
            // span(Q⊥) of the general case is span(q)
            assert!((vector.cos2_formula + general.cos2_formula - 1.0).abs() < 1e-8);
            assert!((vector.cos2_direct - (1.0 - general.cos2_direct)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_frames() {
        let m = random_symmetric(5, &mut seeded(6));
        let bad = Mat::from_fn(5, 2, |_, _| 1.0);
        assert!(verify_general_master(&m, bad.as_ref(), 1).is_err());
        let full = Mat::<f64>::identity(5, 5);
        assert!(verify_general_master(&m, full.as_ref(), 1).is_err());
        let q = Col::from_fn(5, |_| 1.0);
        assert!(verify_vector_master(&m, q.as_ref(), 1).is_err());
    }
}
