//! C ABI for `radguard`.
//!
//! Every fallible function returns an [`RgStatus`]; on failure a message is
//! available from [`rg_last_error`] on the same thread. Networks and
//! validation windows are opaque handles owned by the caller and released
//! with their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use radguard::radius::{search_radius, Verifier};
use radguard::validators::{bootstrap_window, dagostino_pearson_pvalue, threshold_certify, ThresholdPolicy};
use radguard::weights::from_json;
use radguard::{is_robust, load_network, Domain, Error, Network, WindowConfig, WindowState};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    ShapeMismatch = 4,
    DataError = 5,
    IoError = 6,
    InsufficientSample = 7,
    DegenerateSample = 8,
    InvalidUtf8 = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgDomain {
    Interval = 0,
    Zonotope = 1,
}

impl From<RgDomain> for Domain {
    fn from(d: RgDomain) -> Self {
        match d {
            RgDomain::Interval => Domain::Interval,
            RgDomain::Zonotope => Domain::Zonotope,
        }
    }
}

/// Opaque network handle.
pub struct RgNetwork {
    net: Network,
}

/// Opaque sliding-window validator handle.
pub struct RgWindow {
    state: WindowState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RgStatus {
    match e {
        Error::ShapeMismatch { .. } => RgStatus::ShapeMismatch,
        Error::Parse { .. } | Error::InvalidNetwork(_) => RgStatus::ParseError,
        Error::Data(_) | Error::NonFinite(_) | Error::Diverged { .. } => RgStatus::DataError,
        Error::InvalidArgument(_) => RgStatus::InvalidArgument,
        Error::InsufficientSample { .. } => RgStatus::InsufficientSample,
        Error::DegenerateSample => RgStatus::DegenerateSample,
        Error::Io(_) => RgStatus::IoError,
    }
}

struct Failure(RgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RgStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, records any error message and converts panics to `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RgStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RgStatus::Panic
        }
    }
}

unsafe fn input<'a>(data: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if data.is_null() {
        return Err(null("input"));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn network<'a>(net: *const RgNetwork) -> Result<&'a Network, Failure> {
    net.as_ref().map(|h| &h.net).ok_or_else(|| null("network"))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn utf8<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|e| Failure(RgStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

/// Message describing the last failed call on this thread, or null if the
/// last call succeeded. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn rg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn rg_status_name(status: RgStatus) -> *const c_char {
    let s: &'static CStr = match status {
        RgStatus::Ok => c"ok",
        RgStatus::NullPointer => c"null pointer",
        RgStatus::InvalidArgument => c"invalid argument",
        RgStatus::ParseError => c"parse error",
        RgStatus::ShapeMismatch => c"shape mismatch",
        RgStatus::DataError => c"data error",
        RgStatus::IoError => c"i/o error",
        RgStatus::InsufficientSample => c"insufficient sample",
        RgStatus::DegenerateSample => c"degenerate sample",
        RgStatus::InvalidUtf8 => c"invalid utf-8",
        RgStatus::Panic => c"panic",
    };
    s.as_ptr()
}

/// Loads a network from a weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_network_load(path: *const c_char, out_network: *mut *mut RgNetwork) -> RgStatus {
    guard(|| {
        let path = utf8(path, "path")?;
        let slot = out(out_network, "out_network")?;
        let net = load_network(path)?;
        *slot = Box::into_raw(Box::new(RgNetwork { net }));
        Ok(())
    })
}

/// Parses a network from weight-format JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_network_from_json(json: *const c_char, out_network: *mut *mut RgNetwork) -> RgStatus {
    guard(|| {
        let text = utf8(json, "json")?;
        let slot = out(out_network, "out_network")?;
        let net = from_json(text)?;
        *slot = Box::into_raw(Box::new(RgNetwork { net }));
        Ok(())
    })
}

/// Releases a network. Null is ignored.
///
/// # Safety
/// `network` must come from `rg_network_load`/`rg_network_from_json` and not
/// have been freed.
#[no_mangle]
pub unsafe extern "C" fn rg_network_free(network: *mut RgNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Number of input values (0 for a null handle).
///
/// # Safety
/// `network` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rg_network_input_len(network: *const RgNetwork) -> usize {
    network.as_ref().map_or(0, |h| h.net.input_len())
}

/// Number of output classes (0 for a null handle).
///
/// # Safety
/// `network` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rg_network_label_count(network: *const RgNetwork) -> usize {
    network.as_ref().map_or(0, |h| h.net.label_count())
}

/// Forward pass. Writes `label_count` scores to `scores` (if non-null) and
/// the predicted label to `out_label`.
///
/// # Safety
/// `input` must hold `input_len` values, `scores` (if non-null) `scores_len`
/// writable values, `out_label` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_forward(
    network: *const RgNetwork,
    input: *const f64,
    input_len: usize,
    scores: *mut f64,
    scores_len: usize,
    out_label: *mut usize,
) -> RgStatus {
    guard(|| {
        let net = self::network(network)?;
        let x = self::input(input, input_len)?;
        let label = out(out_label, "out_label")?;
        let s = net.scores(x)?;
        if !scores.is_null() {
            if scores_len < s.len() {
                return Err(Failure(
                    RgStatus::InvalidArgument,
                    format!("scores buffer holds {scores_len}, need {}", s.len()),
                ));
            }
            slice::from_raw_parts_mut(scores, s.len()).copy_from_slice(&s);
        }
        *label = radguard::tensor::argmax(&s);
        Ok(())
    })
}

/// Single robustness query: is the label constant on the clipped L∞ ball of
/// radius `delta` around `input`?
///
/// # Safety
/// `input` must hold `input_len` values; `out_robust` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_is_robust(
    network: *const RgNetwork,
    input: *const f64,
    input_len: usize,
    delta: f64,
    domain: RgDomain,
    out_robust: *mut bool,
) -> RgStatus {
    guard(|| {
        let net = self::network(network)?;
        let x = self::input(input, input_len)?;
        let robust = out(out_robust, "out_robust")?;
        *robust = is_robust(net, x, delta, domain.into())?.is_robust();
        Ok(())
    })
}

/// Approximate robustness radius by bisection on `[0, up]` down to width `tol`.
///
/// # Safety
/// `input` must hold `input_len` values; `out_radius` must be writable;
/// `out_probes` may be null.
#[no_mangle]
pub unsafe extern "C" fn rg_approximate_radius(
    network: *const RgNetwork,
    input: *const f64,
    input_len: usize,
    up: f64,
    tol: f64,
    domain: RgDomain,
    out_radius: *mut f64,
    out_probes: *mut usize,
) -> RgStatus {
    guard(|| {
        let net = self::network(network)?;
        let x = self::input(input, input_len)?;
        let radius = out(out_radius, "out_radius")?;
        let params = radguard::SearchParams { up, tol, domain: domain.into() };
        let r = radguard::approximate_radius(net, x, &params)?;
        *radius = r.radius;
        if let Some(p) = out_probes.as_mut() {
            *p = r.iterations;
        }
        Ok(())
    })
}

/// Threshold validator: accepts iff the input is certified robust at `theta`.
///
/// # Safety
/// `input` must hold `input_len` values; `out_accept` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_threshold_validate(
    network: *const RgNetwork,
    input: *const f64,
    input_len: usize,
    theta: f64,
    domain: RgDomain,
    out_accept: *mut bool,
) -> RgStatus {
    guard(|| {
        let net = self::network(network)?;
        let x = self::input(input, input_len)?;
        let accept = out(out_accept, "out_accept")?;
        net.check_input(x)?;
        let policy = ThresholdPolicy::new(theta, domain.into())?;
        *accept = threshold_certify(&Verifier::new(net, domain.into()), x, &policy)?.is_accept();
        Ok(())
    })
}

/// Creates a sliding-window validator from the last `window_size` of
/// `count` radii of known-valid inputs.
///
/// # Safety
/// `radii` must hold `count` values; `out_window` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_window_new(
    radii: *const f64,
    count: usize,
    window_size: usize,
    sigma0: f64,
    sigma1: f64,
    out_window: *mut *mut RgWindow,
) -> RgStatus {
    guard(|| {
        let r = self::input(radii, count)?;
        let slot = out(out_window, "out_window")?;
        let state = bootstrap_window(r, WindowConfig { size: window_size, sigma0, sigma1 })?;
        *slot = Box::into_raw(Box::new(RgWindow { state }));
        Ok(())
    })
}

/// Feeds one radius to the window. Accepted radii enter the window.
///
/// # Safety
/// `window` must be a live handle; `out_accept` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_window_step(window: *mut RgWindow, radius: f64, out_accept: *mut bool) -> RgStatus {
    guard(|| {
        let w = window.as_mut().ok_or_else(|| null("window"))?;
        let accept = out(out_accept, "out_accept")?;
        let decision = w.state.step_mut(radius);
        *accept = decision.is_accept();
        Ok(())
    })
}

/// Certifies the radius of `input` and feeds it to the window in one call.
///
/// # Safety
/// As for [`rg_approximate_radius`] and [`rg_window_step`]; `out_radius`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn rg_window_validate(
    window: *mut RgWindow,
    network: *const RgNetwork,
    input: *const f64,
    input_len: usize,
    up: f64,
    tol: f64,
    domain: RgDomain,
    out_accept: *mut bool,
    out_radius: *mut f64,
) -> RgStatus {
    guard(|| {
        let w = window.as_mut().ok_or_else(|| null("window"))?;
        let net = self::network(network)?;
        let x = self::input(input, input_len)?;
        let accept = out(out_accept, "out_accept")?;
        net.check_input(x)?;
        let r = search_radius(&Verifier::new(net, domain.into()), x, up, tol)?.radius;
        *accept = w.state.step_mut(r).is_accept();
        if let Some(p) = out_radius.as_mut() {
            *p = r;
        }
        Ok(())
    })
}

/// Number of radii currently in the window (0 for a null handle).
///
/// # Safety
/// `window` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rg_window_len(window: *const RgWindow) -> usize {
    window.as_ref().map_or(0, |w| w.state.len())
}

/// Releases a window. Null is ignored.
///
/// # Safety
/// `window` must come from `rg_window_new` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rg_window_free(window: *mut RgWindow) {
    if !window.is_null() {
        drop(Box::from_raw(window));
    }
}

/// Omnibus normality p-value of `count` samples (at least 20, not all equal).
///
/// # Safety
/// `samples` must hold `count` values; `out_p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rg_normality_pvalue(samples: *const f64, count: usize, out_p: *mut f64) -> RgStatus {
    guard(|| {
        let s = self::input(samples, count)?;
        let p = out(out_p, "out_p")?;
        *p = dagostino_pearson_pvalue(s)?;
        Ok(())
    })
}
