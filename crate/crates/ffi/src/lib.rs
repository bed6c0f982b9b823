//! C ABI over the `wtacrs` estimators.
//!
//! Matrices and random streams are opaque handles created and freed by this
//! library. Every fallible call returns a [`WtaStatus`]; on failure
//! [`wta_last_error`] describes the error for the calling thread. Matrix data
//! is row-major `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wtacrs::estimators::{
    col_row_distribution, optimal_det_size, theoretical_crs_variance, theoretical_wta_variance,
    ColRowDistribution, Estimator, EstimatorKind,
};
use wtacrs::tensor::{DenseMatrix, RandomSource};
use wtacrs::Error;

/// Result of a call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WtaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    NonFinite = 4,
    Degenerate = 5,
    UndefinedTerm = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Opaque dense matrix.
pub struct WtaMatrix(DenseMatrix);

/// Opaque seeded random stream.
pub struct WtaRng(RandomSource);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> WtaStatus {
    match err {
        Error::Shape { .. } | Error::DataLength { .. } => WtaStatus::Shape,
        Error::NonFinite { .. } => WtaStatus::NonFinite,
        Error::Degenerate(_) => WtaStatus::Degenerate,
        Error::UndefinedTerm { .. } => WtaStatus::UndefinedTerm,
        Error::InvalidArgument(_) | Error::OutcomeSpaceTooLarge { .. } => WtaStatus::InvalidArgument,
        Error::State(_) | Error::Divergence { .. } => WtaStatus::Internal,
    }
}

enum Fail {
    Status(WtaStatus, String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn null() -> Fail {
    Fail::Status(WtaStatus::NullPointer, "null pointer argument".into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> WtaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WtaStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            WtaStatus::Internal
        }
    }
}

unsafe fn matrix<'a>(m: *const WtaMatrix) -> Result<&'a DenseMatrix, Fail> {
    m.as_ref().map(|m| &m.0).ok_or_else(null)
}

unsafe fn emit(out: *mut *mut WtaMatrix, m: DenseMatrix) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(WtaMatrix(m)));
    Ok(())
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn wta_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn wta_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `rows * cols` row-major values into a new matrix.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn wta_matrix_new(rows: usize, cols: usize, data: *const f64, out: *mut *mut WtaMatrix) -> WtaStatus {
    guard(|| {
        let len = rows.checked_mul(cols).ok_or_else(|| Fail::Status(WtaStatus::InvalidArgument, "size overflow".into()))?;
        if data.is_null() && len > 0 {
            return Err(null());
        }
        let values = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(data, len).to_vec() };
        emit(out, DenseMatrix::new(rows, cols, values)?)
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn wta_matrix_free(m: *mut WtaMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live matrix or null (which gives 0).
#[no_mangle]
pub unsafe extern "C" fn wta_matrix_rows(m: *const WtaMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.rows())
}

/// # Safety
/// `m` must be a live matrix or null (which gives 0).
#[no_mangle]
pub unsafe extern "C" fn wta_matrix_cols(m: *const WtaMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.cols())
}

/// Copies the row-major values into `buf`, which holds `len` doubles.
///
/// # Safety
/// `m` must be a live matrix; `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wta_matrix_copy_data(m: *const WtaMatrix, buf: *mut f64, len: usize) -> WtaStatus {
    guard(|| {
        let m = matrix(m)?;
        let data = m.data();
        if len < data.len() {
            return Err(Fail::Status(
                WtaStatus::BufferTooSmall,
                format!("buffer holds {len} values, need {}", data.len()),
            ));
        }
        if !data.is_empty() {
            if buf.is_null() {
                return Err(null());
            }
            ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        }
        Ok(())
    })
}

/// New random stream; equal `(seed, stream)` pairs give equal draws.
#[no_mangle]
pub extern "C" fn wta_rng_new(seed: u64, stream: u64) -> *mut WtaRng {
    Box::into_raw(Box::new(WtaRng(RandomSource::new(seed, stream))))
}

/// # Safety
/// `rng` must come from [`wta_rng_new`] and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn wta_rng_free(rng: *mut WtaRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Exact product `x · y`.
///
/// # Safety
/// `x` and `y` must be live matrices; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wta_matmul(x: *const WtaMatrix, y: *const WtaMatrix, out: *mut *mut WtaMatrix) -> WtaStatus {
    guard(|| emit(out, matrix(x)?.matmul(matrix(y)?)?))
}

unsafe fn sampled(
    kind: EstimatorKind,
    x: *const WtaMatrix,
    y: *const WtaMatrix,
    k: usize,
    rng: *mut WtaRng,
    out: *mut *mut WtaMatrix,
) -> WtaStatus {
    guard(|| {
        let rng = rng.as_mut().ok_or_else(null)?;
        let est = Estimator::new(kind, matrix(x)?, matrix(y)?, k)?;
        emit(out, est.sample(&mut rng.0))
    })
}

/// CRS estimate of `x · y` from `k` sampled pairs.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wta_estimate_crs(
    x: *const WtaMatrix,
    y: *const WtaMatrix,
    k: usize,
    rng: *mut WtaRng,
    out: *mut *mut WtaMatrix,
) -> WtaStatus {
    sampled(EstimatorKind::Crs, x, y, k, rng, out)
}

/// WTA-CRS estimate of `x · y` with budget `k` and the variance-optimal head.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wta_estimate_wta_crs(
    x: *const WtaMatrix,
    y: *const WtaMatrix,
    k: usize,
    rng: *mut WtaRng,
    out: *mut *mut WtaMatrix,
) -> WtaStatus {
    sampled(EstimatorKind::WtaCrs, x, y, k, rng, out)
}

/// Sum of the `k` most probable pair terms.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wta_estimate_deterministic(
    x: *const WtaMatrix,
    y: *const WtaMatrix,
    k: usize,
    out: *mut *mut WtaMatrix,
) -> WtaStatus {
    guard(|| {
        let est = Estimator::new(EstimatorKind::DeterministicTopK, matrix(x)?, matrix(y)?, k)?;
        emit(out, est.sample(&mut RandomSource::new(0, 0)))
    })
}

/// Writes the norm-product distribution of `x · y` into `probs`, which holds
/// `len ≥ x.cols` doubles.
///
/// # Safety
/// Handles must be live; `probs` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wta_col_row_distribution(
    x: *const WtaMatrix,
    y: *const WtaMatrix,
    probs: *mut f64,
    len: usize,
) -> WtaStatus {
    guard(|| {
        let p = col_row_distribution(matrix(x)?, matrix(y)?)?;
        if len < p.len() {
            return Err(Fail::Status(WtaStatus::BufferTooSmall, format!("need {} values", p.len())));
        }
        if probs.is_null() {
            return Err(null());
        }
        ptr::copy_nonoverlapping(p.probs().as_ptr(), probs, p.len());
        Ok(())
    })
}

/// Variance-optimal head size for budget `k` under `probs[0..len]`.
///
/// # Safety
/// `probs` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wta_optimal_det_size(probs: *const f64, len: usize, k: usize, out: *mut usize) -> WtaStatus {
    guard(|| {
        if probs.is_null() || out.is_null() {
            return Err(null());
        }
        let p = ColRowDistribution::new(std::slice::from_raw_parts(probs, len).to_vec())?;
        *out = optimal_det_size(&p, k)?;
        Ok(())
    })
}

/// `E‖g - xy‖²_F` of CRS at the norm-product distribution.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wta_theoretical_crs_variance(
    x: *const WtaMatrix,
    y: *const WtaMatrix,
    k: usize,
    out: *mut f64,
) -> WtaStatus {
    guard(|| {
        let (x, y) = (matrix(x)?, matrix(y)?);
        let p = col_row_distribution(x, y)?;
        let v = theoretical_crs_variance(x, y, &p, k)?;
        *out.as_mut().ok_or_else(null)? = v;
        Ok(())
    })
}

/// `E‖ĝ - xy‖²_F` of WTA-CRS at the norm-product distribution and the
/// variance-optimal head.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wta_theoretical_wta_variance(
    x: *const WtaMatrix,
    y: *const WtaMatrix,
    k: usize,
    out: *mut f64,
) -> WtaStatus {
    guard(|| {
        let (x, y) = (matrix(x)?, matrix(y)?);
        let p = col_row_distribution(x, y)?;
        let s = optimal_det_size(&p, k)?;
        let v = theoretical_wta_variance(x, y, &p, k, s)?;
        *out.as_mut().ok_or_else(null)? = v;
        Ok(())
    })
}
