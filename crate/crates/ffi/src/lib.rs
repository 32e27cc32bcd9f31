//! C ABI over the `eigdebias` estimators.
//!
//! Conventions:
//!
//! * every fallible function returns an [`EdStatus`]; results go through out
//!   pointers, which are left untouched on error;
//! * the message for the most recent failure on the calling thread is
//!   available from [`ed_last_error_message`];
//! * matrices cross the boundary as opaque handles built from row-major
//!   buffers and released with their `_free` function;
//! * indices `l` are 1-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use eigdebias::{denoise, lowerbounds, pca, Error, Ordering, SymmetricMatrix};
use faer::{Col, Mat};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdStatus {
    Ok = 0,
    InvalidInput = 1,
    NumericalFailure = 2,
    DegenerateSpectrum = 3,
    OutsideBulkRequired = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Symmetric `n×n` matrix.
pub struct EdSymMatrix(SymmetricMatrix);

/// `p×n` data matrix, one sample per column.
pub struct EdDataMatrix(Mat<f64>);

/// Plug-in and de-biased estimates of `aᵀu_l*`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EdEstimate {
    pub plugin: f64,
    /// `b_l` (denoising) or `c_l` (PCA).
    pub correction: f64,
    pub factor: f64,
    pub debiased: f64,
    /// PCA only: the noise level used, NaN when the formula did not need it.
    pub sigma2: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> EdStatus {
    match e {
        Error::InvalidInput(_) | Error::Io { .. } => EdStatus::InvalidInput,
        Error::NumericalFailure(_) => EdStatus::NumericalFailure,
        Error::DegenerateSpectrum(_) => EdStatus::DegenerateSpectrum,
        Error::OutsideBulkRequired(_) => EdStatus::OutsideBulkRequired,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EdStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            EdStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic");
            EdStatus::Panic
        }
    }
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

fn col(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}

/// Builds a symmetric matrix from `n*n` row-major entries.
///
/// # Safety
/// `entries` must point to `n*n` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_sym_matrix_new(n: usize, entries: *const f64, out: *mut *mut EdSymMatrix) -> EdStatus {
    guard(|| {
        let len = n
            .checked_mul(n)
            .ok_or_else(|| Error::InvalidInput(format!("n = {n} overflows")))?;
        let data = slice(entries, len, "entries")?;
        let m = SymmetricMatrix::from_row_major(n, data)?;
        write(out, Box::into_raw(Box::new(EdSymMatrix(m))), "out")
    })
}

/// # Safety
/// `m` must come from [`ed_sym_matrix_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ed_sym_matrix_free(m: *mut EdSymMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ed_sym_matrix_dim(m: *const EdSymMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.dim())
}

/// Builds a `p×n` data matrix from `p*n` row-major entries.
///
/// # Safety
/// `entries` must point to `p*n` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_data_matrix_new(
    p: usize,
    n: usize,
    entries: *const f64,
    out: *mut *mut EdDataMatrix,
) -> EdStatus {
    guard(|| {
        if p == 0 || n == 0 {
            return Err(Error::InvalidInput("data matrix needs p, n >= 1".into()).into());
        }
        let len = p
            .checked_mul(n)
            .ok_or_else(|| Error::InvalidInput(format!("{p}x{n} overflows")))?;
        let data = slice(entries, len, "entries")?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("data matrix has non-finite entries".into()).into());
        }
        let m = Mat::from_fn(p, n, |i, j| data[i * n + j]);
        write(out, Box::into_raw(Box::new(EdDataMatrix(m))), "out")
    })
}

/// # Safety
/// `s` must come from [`ed_data_matrix_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ed_data_matrix_free(s: *mut EdDataMatrix) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// De-biased estimate of `aᵀu_l*` from a noisy symmetric matrix with rank-`r`
/// signal and noise level `sigma`.
///
/// # Safety
/// `m` must be a live handle, `a` must point to `a_len` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_estimate_md(
    m: *const EdSymMatrix,
    a: *const f64,
    a_len: usize,
    l: usize,
    r: usize,
    sigma: f64,
    out: *mut EdEstimate,
) -> EdStatus {
    guard(|| {
        let m = deref(m, "m")?;
        let a = col(slice(a, a_len, "a")?);
        if a.nrows() != m.0.dim() {
            return Err(Error::InvalidInput(format!("a has length {}, expected {}", a.nrows(), m.0.dim())).into());
        }
        let est = denoise::estimate_functional_md(&m.0, a.as_ref(), l, r, sigma)?;
        let value = EdEstimate {
            plugin: est.plugin,
            correction: est.correction_b,
            factor: est.factor,
            debiased: est.debiased,
            sigma2: sigma * sigma,
        };
        write(out, value, "out")
    })
}

/// De-biased estimate of `aᵀu_l*` from spiked-covariance samples.
///
/// Pass `sigma2 = NaN` to have the noise level estimated from the bulk
/// eigenvalues when the `n < p` formula needs it.
///
/// # Safety
/// `s` must be a live handle, `a` must point to `a_len` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_estimate_pca(
    s: *const EdDataMatrix,
    a: *const f64,
    a_len: usize,
    l: usize,
    r: usize,
    sigma2: f64,
    out: *mut EdEstimate,
) -> EdStatus {
    guard(|| {
        let s = deref(s, "s")?;
        let (p, n) = (s.0.nrows(), s.0.ncols());
        let a = col(slice(a, a_len, "a")?);
        if a.nrows() != p {
            return Err(Error::InvalidInput(format!("a has length {}, expected {p}", a.nrows())).into());
        }
        let spec = eigdebias::eigendecompose(&pca::sample_covariance(s.0.as_ref()), Ordering::ByValueDesc)?;
        let sigma2 = if sigma2.is_nan() && pca::Branch::select(n, p) == pca::Branch::NltP {
            pca::estimate_noise_pca(&spec, r, n)?
        } else {
            sigma2
        };
        let est = pca::estimate_pca_from_spectrum(&spec, a.as_ref(), l, r, n, sigma2)?;
        let value = EdEstimate {
            plugin: est.plugin,
            correction: est.correction_c,
            factor: est.factor,
            debiased: est.debiased,
            sigma2,
        };
        write(out, value, "out")
    })
}

/// Semicircle-law approximation of `b_l` at an outlier eigenvalue.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_semicircle_b(lambda_l: f64, sigma: f64, n: usize, out: *mut f64) -> EdStatus {
    guard(|| write(out, denoise::semicircle_b(lambda_l, sigma, n)?, "out"))
}

/// Marchenko–Pastur approximation of `c_l` at an outlier eigenvalue.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_mp_debias(lambda_l: f64, sigma2: f64, n: usize, p: usize, out: *mut f64) -> EdStatus {
    guard(|| write(out, pca::mp_debias(lambda_l, sigma2, n, p)?, "out"))
}

/// `min(|u_a − truth|, |u_a + truth|)`.
#[no_mangle]
pub extern "C" fn ed_dist(u_a: f64, truth: f64) -> f64 {
    eigdebias::dist(u_a, truth).value()
}

/// `KL(N(0, Σ₁) ‖ N(0, Σ₀))` for one sample.
///
/// # Safety
/// Both handles must be live and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ed_gaussian_kl(
    sigma0: *const EdSymMatrix,
    sigma1: *const EdSymMatrix,
    out: *mut f64,
) -> EdStatus {
    guard(|| {
        let (s0, s1) = (deref(sigma0, "sigma0")?, deref(sigma1, "sigma1")?);
        write(out, lowerbounds::gaussian_kl(&s0.0, &s1.0)?, "out")
    })
}

/// Message of the last failure on this thread; empty if none. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ed_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn ed_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}
