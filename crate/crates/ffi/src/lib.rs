//! C ABI for anchor loading, calibration and Welch descriptors.
//!
//! Every fallible call returns an [`SscfStatus`]; on failure the message is
//! kept per thread and read back with [`sscf_last_error`]. Arrays are
//! row-major `channels x len` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use sscf::anchors::{load_anchors, AnchorSet};
use sscf::calibrate::{calibrate, CalibrationConfig};
use sscf::spectral::{welch_psd, FeatureMap, SpectralConfig, Window};
use sscf::{Matrix, SscfError};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SscfStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Io = 3,
    Format = 4,
    Invariant = 5,
    Panic = 6,
}

/// Opaque anchor set handle.
pub struct SscfAnchors {
    inner: AnchorSet,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &SscfError) -> SscfStatus {
    match err {
        SscfError::Io { .. } => SscfStatus::Io,
        SscfError::Format(_) => SscfStatus::Format,
        SscfError::InvariantViolation(_) => SscfStatus::Invariant,
        _ => SscfStatus::Validation,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (SscfStatus, String)>) -> SscfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SscfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside sscf".into());
            SscfStatus::Panic
        }
    }
}

fn lift(err: SscfError) -> (SscfStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (SscfStatus, String) {
    (SscfStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `data` must point to `channels * len` readable doubles.
unsafe fn read_map(data: *const f64, channels: usize, len: usize) -> Result<FeatureMap, (SscfStatus, String)> {
    if data.is_null() {
        return Err(null("data"));
    }
    let n = channels
        .checked_mul(len)
        .ok_or_else(|| (SscfStatus::Validation, "channels * len overflows".to_string()))?;
    let values = std::slice::from_raw_parts(data, n).to_vec();
    Matrix::from_vec(channels, len, values)
        .and_then(FeatureMap::new)
        .map_err(lift)
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sscf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sscf_version() -> *const c_char {
    static VERSION: &CStr = c"sscf-ffi/0.1.0";
    VERSION.as_ptr()
}

/// Loads an anchor file. On success `*out` owns a handle to release with
/// [`sscf_anchors_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sscf_anchors_load(path: *const c_char, out: *mut *mut SscfAnchors) -> SscfStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (SscfStatus::Validation, "path is not UTF-8".to_string()))?;
        let inner = load_anchors(Path::new(path)).map_err(lift)?;
        *out = Box::into_raw(Box::new(SscfAnchors { inner }));
        Ok(())
    })
}

/// Releases a handle from [`sscf_anchors_load`]. Null is ignored.
///
/// # Safety
/// `handle` must come from [`sscf_anchors_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sscf_anchors_free(handle: *mut SscfAnchors) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of strata, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sscf_anchors_k(handle: *const SscfAnchors) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.k())
}

/// Writes the template shape `(channels, bins)`.
///
/// # Safety
/// `handle` must be a live handle; `channels` and `bins` writable.
#[no_mangle]
pub unsafe extern "C" fn sscf_anchors_shape(
    handle: *const SscfAnchors,
    channels: *mut usize,
    bins: *mut usize,
) -> SscfStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        if channels.is_null() || bins.is_null() {
            return Err(null("output"));
        }
        let (c, b) = h.inner.shape();
        *channels = c;
        *bins = b;
        Ok(())
    })
}

/// Calibrates one series against the nearest `rank`-th anchor, using the
/// spectral settings stored with the anchors. `out` receives
/// `channels * len` doubles; `stratum` (nullable) the matched stratum.
///
/// # Safety
/// `data` and `out` must each hold `channels * len` doubles and may not overlap.
#[no_mangle]
pub unsafe extern "C" fn sscf_calibrate(
    handle: *const SscfAnchors,
    data: *const f64,
    channels: usize,
    len: usize,
    rank: usize,
    out: *mut f64,
    stratum: *mut usize,
) -> SscfStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let map = read_map(data, channels, len)?;
        let cfg = CalibrationConfig {
            eps: h.inner.eps,
            rank,
            ..CalibrationConfig::default()
        };
        let c = calibrate(&map, &h.inner, &h.inner.spectral_cfg, &cfg).map_err(lift)?;
        std::slice::from_raw_parts_mut(out, channels * len).copy_from_slice(c.data.matrix().as_slice());
        if !stratum.is_null() {
            *stratum = c.matched_stratum;
        }
        Ok(())
    })
}

/// Welch power descriptor with a periodic Hann window. `out` receives
/// `channels * (frame_len / 2 + 1)` doubles.
///
/// # Safety
/// `data` must hold `channels * len` doubles and `out` the amount above.
#[no_mangle]
pub unsafe extern "C" fn sscf_welch_psd(
    data: *const f64,
    channels: usize,
    len: usize,
    frame_len: usize,
    hop: usize,
    out: *mut f64,
) -> SscfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let map = read_map(data, channels, len)?;
        let cfg = SpectralConfig {
            frame_len,
            hop,
            window: Window::Hann,
            ..SpectralConfig::default()
        };
        let p = welch_psd(&map, &cfg).map_err(lift)?;
        let src = p.data().as_slice();
        std::slice::from_raw_parts_mut(out, src.len()).copy_from_slice(src);
        Ok(())
    })
}
