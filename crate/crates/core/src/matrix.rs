//! Dense symmetric matrices, ordered eigendecompositions, the sign-invariant
//! distance, and the Poincaré separation (interlacing) check.

use faer::{Col, ColRef, Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Relative asymmetry accepted (and removed) when building a [`SymmetricMatrix`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Tolerance for `UᵀU = I` on orthonormal frames.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// A real symmetric `n×n` matrix.
///
/// Construction symmetrizes `(A + Aᵀ)/2` when the input is symmetric up to
/// `1e-12·(1 + max|A|)` and rejects it otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    inner: Mat<f64>,
}

impl SymmetricMatrix {
    pub fn new(m: Mat<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("matrix must have positive dimension"));
        }
        let n = m.nrows();
        let mut max_abs = 0.0f64;
        let mut max_asym = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                max_abs = max_abs.max(m[(i, j)].abs());
                if i > j {
                    max_asym = max_asym.max((m[(i, j)] - m[(j, i)]).abs());
                }
            }
        }
        if max_asym > SYMMETRY_TOL * (1.0 + max_abs) {
            return Err(Error::invalid(format!(
                "matrix is not symmetric (max |A_ij - A_ji| = {max_asym:e})"
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Row-major `n×n` entries.
    pub fn from_row_major(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        Self::new(Mat::from_fn(n, n, |i, j| entries[i * n + j]))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: Mat::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: Mat::identity(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            inner: Mat::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }),
        }
    }

    /// Averages `m` with its transpose without checking the asymmetry.
    /// Used for products that are symmetric in exact arithmetic.
    pub(crate) fn symmetrized(mut m: Mat<f64>) -> Self {
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { inner: m }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        self.inner.as_ref()
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.inner
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        let n = self.dim();
        let mut m = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                m = m.max(self.inner[(i, j)].abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| self.inner[(i, j)].is_finite()))
    }

    pub fn add(&self, other: &SymmetricMatrix) -> Result<SymmetricMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::invalid("dimension mismatch in matrix sum"));
        }
        Ok(Self {
            inner: &self.inner + &other.inner,
        })
    }

    pub fn scale(&self, c: f64) -> SymmetricMatrix {
        Self {
            inner: Mat::from_fn(self.dim(), self.dim(), |i, j| c * self.inner[(i, j)]),
        }
    }

    /// `UᵀAU` for a frame `U` with `n` rows.
    pub fn compress(&self, frame: MatRef<'_, f64>) -> Result<SymmetricMatrix> {
        if frame.nrows() != self.dim() {
            return Err(Error::invalid(format!(
                "frame has {} rows, matrix has dimension {}",
                frame.nrows(),
                self.dim()
            )));
        }
        let prod = frame.transpose() * self.inner.as_ref() * frame;
        Ok(Self::symmetrized(prod))
    }

    /// `‖A‖₂ = max |λ_i|`.
    pub fn spectral_norm(&self) -> Result<f64> {
        let vals = eigenvalues(self, Ordering::ByMagnitudeDesc)?;
        Ok(vals[0].abs())
    }

    pub fn matvec(&self, x: ColRef<'_, f64>) -> Col<f64> {
        self.inner.as_ref() * x
    }
}

/// Eigenvalue ordering policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ordering {
    /// `|λ_1| ≥ |λ_2| ≥ …`; ties in magnitude go to the larger signed value.
    ByMagnitudeDesc,
    /// `λ_1 ≥ λ_2 ≥ …`.
    ByValueDesc,
}

impl Ordering {
    fn compare(self, a: f64, b: f64) -> std::cmp::Ordering {
        match self {
            Ordering::ByMagnitudeDesc => b.abs().total_cmp(&a.abs()).then(b.total_cmp(&a)),
            Ordering::ByValueDesc => b.total_cmp(&a),
        }
    }
}

/// Eigenpairs of a symmetric matrix, sorted by an explicit [`Ordering`].
///
/// Each eigenvector is sign-normalized so that its entry of largest
/// magnitude is positive (first such entry on ties).
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<f64>,
    ordering: Ordering,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `i` (0-based) of the eigenvector matrix.
    pub fn eigenvector(&self, i: usize) -> ColRef<'_, f64> {
        self.eigenvectors.col(i)
    }

    pub fn eigenvectors(&self) -> MatRef<'_, f64> {
        self.eigenvectors.as_ref()
    }

    pub fn ordering(&self) -> Ordering {
        self.ordering
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

fn check_finite(a: &SymmetricMatrix) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("matrix has non-finite entries"))
    }
}

pub fn eigendecompose(a: &SymmetricMatrix, ordering: Ordering) -> Result<SpectralDecomposition> {
    check_finite(a)?;
    let evd = a
        .as_mat()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NumericalFailure(format!("symmetric eigensolver: {e:?}")))?;
    let vals = evd.S().column_vector();
    let vecs = evd.U();
    let n = a.dim();

    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&i, &j| ordering.compare(vals[i], vals[j]));

    let eigenvalues: Vec<f64> = perm.iter().map(|&i| vals[i]).collect();
    let mut eigenvectors = Mat::zeros(n, n);
    for (dst, &src) in perm.iter().enumerate() {
        let col = vecs.col(src);
        let mut pivot = 0usize;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            eigenvectors[(i, dst)] = sign * col[i];
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        ordering,
    })
}

/// Eigenvalues only; cheaper than [`eigendecompose`] for large matrices.
pub fn eigenvalues(a: &SymmetricMatrix, ordering: Ordering) -> Result<Vec<f64>> {
    check_finite(a)?;
    let mut vals = a
        .as_mat()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::NumericalFailure(format!("symmetric eigensolver: {e:?}")))?;
    vals.sort_by(|&x, &y| ordering.compare(x, y));
    Ok(vals)
}

/// `min(|u_a − t|, |u_a + t|)`: error modulo the global sign of an eigenvector.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct DistanceValue(f64);

impl DistanceValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn dist(u_a: f64, truth: f64) -> DistanceValue {
    DistanceValue((u_a - truth).abs().min((u_a + truth).abs()))
}

/// Largest entry of `|UᵀU − I|`.
pub fn orthonormality_defect(frame: MatRef<'_, f64>) -> f64 {
    let gram = frame.transpose() * frame;
    let k = gram.nrows();
    let mut worst = 0.0f64;
    for j in 0..k {
        for i in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

pub fn ensure_orthonormal(frame: MatRef<'_, f64>) -> Result<()> {
    let defect = orthonormality_defect(frame);
    if defect > ORTHONORMAL_TOL || !defect.is_finite() {
        return Err(Error::invalid(format!(
            "frame is not orthonormal (max |UᵀU - I| = {defect:e})"
        )));
    }
    Ok(())
}

/// Completes the columns of `frame` (`n×k`) to an orthonormal basis and
/// returns the `n×(n−k)` complement, taken from a full Householder QR.
pub fn orthonormal_complement(frame: MatRef<'_, f64>) -> Mat<f64> {
    let n = frame.nrows();
    let k = frame.ncols();
    let q = frame.qr().compute_Q();
    Mat::from_fn(n, n - k, |i, j| q[(i, k + j)])
}

pub fn dot(a: ColRef<'_, f64>, b: ColRef<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: ColRef<'_, f64>) -> f64 {
    dot(a, a).sqrt()
}

/// Runs `f` with faer's internal threading switched off, so that results do
/// not depend on the size of the surrounding rayon pool.
pub(crate) fn with_sequential_kernels<T>(f: impl FnOnce() -> T) -> T {
    struct Restore(faer::Par);
    impl Drop for Restore {
        fn drop(&mut self) {
            faer::set_global_parallelism(self.0);
        }
    }
    let _restore = Restore(faer::get_global_parallelism());
    faer::set_global_parallelism(faer::Par::Seq);
    f()
}

/// Result of [`check_interlacing`].
#[derive(Clone, Debug)]
pub struct InterlacingReport {
    pub holds: bool,
    /// Smallest slack over both inequalities for all `i`; negative means a
    /// violation of that size.
    pub worst_slack: f64,
    /// Eigenvalues of `UᵀAU`, descending.
    pub compressed: Vec<f64>,
}

/// Checks `λ_{n−k+i}(A) ≤ λ_i(UᵀAU) ≤ λ_i(A)` for `1 ≤ i ≤ k`, with
/// tolerance `1e-9·(1 + ‖A‖)`.
pub fn check_interlacing(a: &SymmetricMatrix, frame: MatRef<'_, f64>) -> Result<InterlacingReport> {
    ensure_orthonormal(frame)?;
    let n = a.dim();
    let k = frame.ncols();
    if frame.nrows() != n || k == 0 || k > n {
        return Err(Error::invalid(format!(
            "frame must be {n}xk with 1 <= k <= {n}, got {}x{k}",
            frame.nrows()
        )));
    }
    let full = eigenvalues(a, Ordering::ByValueDesc)?;
    let compressed = eigenvalues(&a.compress(frame)?, Ordering::ByValueDesc)?;
    let norm = full[0].abs().max(full[n - 1].abs());
    let tol = 1e-9 * (1.0 + norm);
    let worst_slack = compressed
        .iter()
        .enumerate()
        .map(|(i, &mu)| (full[i] - mu).min(mu - full[n - k + i]))
        .fold(f64::INFINITY, f64::min);
    Ok(InterlacingReport {
        holds: worst_slack >= -tol,
        worst_slack,
        compressed,
    })
}
