//! C ABI over `globrob`.
//!
//! Networks and reports are opaque handles created by this library and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`GrStatus`]; on failure [`gr_last_error`] describes the error for the
//! calling thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use globrob::net::{load_network, parse_network, Network};
use globrob::perturb::PerturbationSpec;
use globrob::verify::{verify, Mode, VerificationReport, VerificationRequest, DEFAULT_PRECISION};
use globrob::Error;

#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrStatus {
    GR_OK = 0,
    GR_NULL_POINTER = 1,
    GR_INVALID_UTF8 = 2,
    GR_PARSE = 3,
    GR_VALIDATION = 4,
    GR_ARGUMENT = 5,
    GR_INPUT_SHAPE = 6,
    GR_CLASS_INDEX = 7,
    GR_IO = 8,
    GR_INFEASIBLE_INPUT = 9,
    GR_UNSUPPORTED = 10,
    GR_INTERNAL = 11,
    GR_PANIC = 12,
}

use GrStatus::*;

/// Opaque network handle.
pub struct GrNetwork(Network);

/// Opaque verification report handle.
pub struct GrReport(VerificationReport);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrVerifyOptions {
    /// Seconds per MIP.
    pub timeout_secs: f64,
    /// Precision level added to the non-robust bound.
    pub precision: f64,
    pub seed: u64,
    pub use_deps: bool,
    pub use_attack: bool,
    pub use_hints: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrBounds {
    pub nonrobust_lower: f64,
    pub nonrobust_upper: f64,
    pub robust_lower: f64,
    pub robust_upper: f64,
    /// Every MIP reached a proven optimum.
    pub complete: bool,
}

/// MIP outcome codes of [`GrRun::status`].
pub const GR_RUN_OPTIMAL: i32 = 0;
pub const GR_RUN_INFEASIBLE: i32 = 1;
pub const GR_RUN_TIMEOUT: i32 = 2;
pub const GR_RUN_NODE_LIMIT: i32 = 3;
pub const GR_RUN_SIGN_RESOLVED: i32 = 4;
pub const GR_RUN_STALLED: i32 = 5;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrRun {
    pub target: usize,
    pub status: i32,
    pub lower: f64,
    pub upper: f64,
    pub attack_lower: f64,
    pub nodes: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GrStatus {
    match e {
        Error::Parse(_) => GR_PARSE,
        Error::Validation(_) | Error::Encoding(_) => GR_VALIDATION,
        Error::Argument(_) | Error::InsufficientInputs { .. } | Error::IntractableGrid { .. } => GR_ARGUMENT,
        Error::InputShape { .. } => GR_INPUT_SHAPE,
        Error::ClassIndex { .. } => GR_CLASS_INDEX,
        Error::Io { .. } => GR_IO,
        Error::InfeasibleInput => GR_INFEASIBLE_INPUT,
        Error::UnsupportedRange(_) => GR_UNSUPPORTED,
        Error::Internal(_) => GR_INTERNAL,
    }
}

/// Runs `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), (GrStatus, String)>) -> GrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GR_OK,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside globrob".into());
            GR_PANIC
        }
    }
}

fn lib_err(e: Error) -> (GrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (GrStatus, String) {
    (GR_NULL_POINTER, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (GrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (GR_INVALID_UTF8, format!("{what} is not valid UTF-8")))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn gr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a network file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gr_network_load(path: *const c_char, out: *mut *mut GrNetwork) -> GrStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let net = load_network(path).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(GrNetwork(net)));
        Ok(())
    })
}

/// Parses a network from JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gr_network_parse(json: *const c_char, out: *mut *mut GrNetwork) -> GrStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let net = parse_network(text).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(GrNetwork(net)));
        Ok(())
    })
}

/// # Safety
/// `net` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gr_network_free(net: *mut GrNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Input length, 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gr_network_input_len(net: *const GrNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.input_len())
}

/// Number of classes, 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gr_network_num_classes(net: *const GrNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.num_classes())
}

/// Class confidence of `class` at input `x` of length `len`.
///
/// # Safety
/// `x` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_network_confidence(
    net: *const GrNetwork,
    x: *const f64,
    len: usize,
    class: usize,
    out: *mut f64,
) -> GrStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if x.is_null() || out.is_null() {
            return Err(null("x or out"));
        }
        let xs = std::slice::from_raw_parts(x, len);
        *out = net.0.confidence(xs, class).map_err(lib_err)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn gr_verify_options_default() -> GrVerifyOptions {
    GrVerifyOptions {
        timeout_secs: 60.0,
        precision: DEFAULT_PRECISION,
        seed: 0,
        use_deps: true,
        use_attack: true,
        use_hints: true,
    }
}

/// Verifies `c_prime` against `n_targets` target classes under the
/// perturbation given in text syntax, e.g. `"occlusion(1,1,1)"`. A null
/// `options` means the defaults.
///
/// # Safety
/// Pointers must be valid; `targets` must hold `n_targets` entries.
#[no_mangle]
pub unsafe extern "C" fn gr_verify(
    net: *const GrNetwork,
    c_prime: usize,
    targets: *const usize,
    n_targets: usize,
    perturbation: *const c_char,
    options: *const GrVerifyOptions,
    out: *mut *mut GrReport,
) -> GrStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if out.is_null() || (targets.is_null() && n_targets > 0) {
            return Err(null("out or targets"));
        }
        let spec: PerturbationSpec = str_arg(perturbation, "perturbation")?.parse().map_err(lib_err)?;
        let targets = if n_targets == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(targets, n_targets).to_vec()
        };
        let opts = options.as_ref().copied().unwrap_or_else(|| gr_verify_options_default());
        let mut req = VerificationRequest::new(net.0.clone(), c_prime, targets, spec);
        req.timeout = Duration::try_from_secs_f64(opts.timeout_secs)
            .map_err(|_| (GR_ARGUMENT, format!("bad timeout {}", opts.timeout_secs)))?;
        req.precision = opts.precision;
        req.seed = opts.seed;
        req.mode = Mode {
            use_deps: opts.use_deps,
            use_attack: opts.use_attack,
            use_hints: opts.use_hints,
        };
        let report = verify(&req).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(GrReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gr_report_free(report: *mut GrReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_report_bounds(report: *const GrReport, out: *mut GrBounds) -> GrStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = GrBounds {
            nonrobust_lower: r.nonrobust.lower,
            nonrobust_upper: r.nonrobust.upper,
            robust_lower: r.robust.lower,
            robust_upper: r.robust.upper,
            complete: r.complete,
        };
        Ok(())
    })
}

/// Number of MIP runs, 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gr_report_num_runs(report: *const GrReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.runs.len())
}

/// # Safety
/// `report` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gr_report_run(report: *const GrReport, index: usize, out: *mut GrRun) -> GrStatus {
    use globrob::bnb::MipStatus;
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let run = r
            .runs
            .get(index)
            .ok_or_else(|| (GR_ARGUMENT, format!("run {index} out of range ({} runs)", r.runs.len())))?;
        *out = GrRun {
            target: run.target,
            status: match run.status {
                MipStatus::Optimal => GR_RUN_OPTIMAL,
                MipStatus::Infeasible => GR_RUN_INFEASIBLE,
                MipStatus::Timeout => GR_RUN_TIMEOUT,
                MipStatus::NodeLimit => GR_RUN_NODE_LIMIT,
                MipStatus::SignResolved => GR_RUN_SIGN_RESOLVED,
                MipStatus::Stalled => GR_RUN_STALLED,
            },
            lower: run.lower,
            upper: run.upper,
            attack_lower: run.delta_ha,
            nodes: run.nodes,
        };
        Ok(())
    })
}

/// The full report as JSON; release with [`gr_string_free`]. Null on error.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gr_report_to_json(report: *const GrReport) -> *mut c_char {
    let mut text = None;
    let status = guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        let json = serde_json::to_string(r).map_err(|e| (GR_INTERNAL, e.to_string()))?;
        text = Some(CString::new(json).map_err(|e| (GR_INTERNAL, e.to_string()))?);
        Ok(())
    });
    match (status, text) {
        (GR_OK, Some(c)) => c.into_raw(),
        _ => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must come from [`gr_report_to_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
