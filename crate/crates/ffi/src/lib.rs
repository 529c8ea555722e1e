//! C interface: load stored models and predict, plus the standalone metric
//! and filter routines.
//!
//! Every function returns a [`CsStatus`]. On failure the message is
//! available from [`cs_last_error_message`] on the same thread. Models are
//! opaque handles released with [`cs_model_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use carbospec::metrics::{evaluate, wasserstein, QualityBand, StdevKind};
use carbospec::preprocess::{savitzky_golay, SgParams};
use carbospec::spectral::{Source, SpectralDataset, Spectrum};
use carbospec::store::{load_model, Model};
use carbospec::{Error, ErrorClass};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Validation = 3,
    Io = 4,
    Divergence = 5,
    Panic = 6,
}

/// Opaque fitted model.
pub struct CsModel {
    inner: Model,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CsMetrics {
    pub r2: f64,
    pub rmse: f64,
    /// Population standard deviation of the observations over RMSE.
    pub rpd: f64,
    pub rpiq: f64,
    /// 0 Poor, 1 Moderate, 2 Good, 3 Excellent.
    pub band: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: Error) -> CsStatus {
    let status = match e.class() {
        ErrorClass::Validation => CsStatus::Validation,
        ErrorClass::Io => CsStatus::Io,
        ErrorClass::Divergence => CsStatus::Divergence,
    };
    set_error(e.to_string());
    status
}

fn null(what: &str) -> CsStatus {
    set_error(format!("{what} is null"));
    CsStatus::NullPointer
}

fn guard(f: impl FnOnce() -> CsStatus) -> CsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic".into());
            CsStatus::Panic
        }
    }
}

/// `ptr` must be null or point to `len` readable values.
unsafe fn slice<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Load a model file. On success `*out` owns a handle.
///
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_model_load(path: *const c_char, out: *mut *mut CsModel) -> CsStatus {
    guard(|| {
        if path.is_null() {
            return null("path");
        }
        if out.is_null() {
            return null("out");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            set_error("path is not valid UTF-8".into());
            return CsStatus::InvalidUtf8;
        };
        match load_model(path) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(CsModel { inner: m }));
                CsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a handle from [`cs_model_load`]. Null is ignored.
///
/// `model` must be null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cs_model_free(model: *mut CsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Container kind tag (1 PLSR, 2 Cubist, 3 LS-SVM, 4 MLP, 5 CNN), 0 for null.
///
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_model_kind(model: *const CsModel) -> u8 {
    model.as_ref().map_or(0, |m| m.inner.kind().tag())
}

/// Spectral points per input row, 0 for null.
///
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_model_n_points(model: *const CsModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.grid.n_points())
}

/// Predict from `n_rows` row-major spectra of `n_cols` points each, given
/// in the kind and on the grid the model was trained with. Writes `n_rows`
/// values to `out`.
///
/// `model` must be a live handle, `spectra` must hold `n_rows · n_cols`
/// values and `out` room for `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn cs_model_predict(
    model: *const CsModel,
    spectra: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let Some(m) = model.as_ref() else { return null("model") };
        let m = &m.inner;
        let Some(total) = n_rows.checked_mul(n_cols) else {
            return fail(Error::InvalidParams("n_rows · n_cols overflows".into()));
        };
        let Some(x) = slice(spectra, total) else { return null("spectra") };
        if out.is_null() && n_rows > 0 {
            return null("out");
        }
        if n_rows == 0 {
            return fail(Error::EmptyInput);
        }
        if n_cols != m.grid.n_points() {
            return fail(Error::WidthMismatch { expected: m.grid.n_points(), found: n_cols });
        }
        let spectra = x
            .chunks_exact(n_cols)
            .enumerate()
            .map(|(i, row)| Spectrum::new(format!("row{i}"), m.input_kind, row.to_vec()))
            .collect();
        let result = SpectralDataset::new(m.grid, Source::Local, spectra, vec![f64::NAN; n_rows])
            .and_then(|d| m.predict(&d));
        match result {
            Ok(pred) => {
                std::slice::from_raw_parts_mut(out, n_rows).copy_from_slice(&pred);
                CsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// R², RMSE, RPD, RPIQ and quality band for `n` pairs.
///
/// `obs` and `pred` must hold `n` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cs_metrics(obs: *const f64, pred: *const f64, n: usize, out: *mut CsMetrics) -> CsStatus {
    guard(|| {
        let (Some(o), Some(p)) = (slice(obs, n), slice(pred, n)) else { return null("obs or pred") };
        if out.is_null() {
            return null("out");
        }
        match evaluate(o, p, StdevKind::Population) {
            Ok(r) => {
                let band = match r.band {
                    QualityBand::Poor => 0,
                    QualityBand::Moderate => 1,
                    QualityBand::Good => 2,
                    QualityBand::Excellent => 3,
                };
                *out = CsMetrics { r2: r.r2, rmse: r.rmse, rpd: r.rpd, rpiq: r.rpiq, band };
                CsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Empirical p-Wasserstein distance between two samples.
///
/// `x` must hold `nx` values, `y` `ny` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cs_wasserstein(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    p: u32,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let (Some(x), Some(y)) = (slice(x, nx), slice(y, ny)) else { return null("x or y") };
        if out.is_null() {
            return null("out");
        }
        match wasserstein(x, y, p) {
            Ok(v) => {
                *out = v;
                CsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Savitzky–Golay filter of `n` samples spaced `step` apart; writes `n`
/// values to `out`.
///
/// `x` must hold `n` values and `out` room for `n`.
#[no_mangle]
pub unsafe extern "C" fn cs_savitzky_golay(
    x: *const f64,
    n: usize,
    window: usize,
    polyorder: usize,
    deriv: usize,
    step: f64,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let Some(x) = slice(x, n) else { return null("x") };
        if out.is_null() && n > 0 {
            return null("out");
        }
        let result = SgParams::new(window, polyorder, deriv).and_then(|p| savitzky_golay(x, p, step));
        match result {
            Ok(v) => {
                std::slice::from_raw_parts_mut(out, n).copy_from_slice(&v);
                CsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Total carbonates from crystalline content and crystalline index.
///
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cs_xrd_total(crystalline_wt_pct: f64, crystalline_index: f64, out: *mut f64) -> CsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match carbospec::metrics::xrd_total_carbonates(crystalline_wt_pct, crystalline_index) {
            Ok(v) => {
                *out = v;
                CsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
