use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use globrob_ffi::*;

fn fixture(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = gr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(name: &str) -> *mut GrNetwork {
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { gr_network_load(fixture(name).as_ptr(), &mut net) }, GrStatus::GR_OK);
    net
}

#[test]
fn load_and_query() {
    let net = load("conv_fc_4x4.json");
    unsafe {
        assert_eq!(gr_network_input_len(net), 16);
        assert_eq!(gr_network_num_classes(net), 2);
        let x = [0.5f64; 16];
        let mut c = 0.0;
        assert_eq!(gr_network_confidence(net, x.as_ptr(), 16, 0, &mut c), GrStatus::GR_OK);
        let expected = globrob::fixtures::conv_fc_4x4().confidence(&x, 0).unwrap();
        assert_eq!(c, expected);
        assert_eq!(gr_network_confidence(net, x.as_ptr(), 3, 0, &mut c), GrStatus::GR_INPUT_SHAPE);
        assert!(last_error().contains("16"));
        gr_network_free(net);
    }
}

#[test]
fn errors_map_to_codes() {
    let mut net = ptr::null_mut();
    unsafe {
        assert_eq!(gr_network_load(ptr::null(), &mut net), GrStatus::GR_NULL_POINTER);
        let missing = CString::new("/nonexistent/net.json").unwrap();
        assert_eq!(gr_network_load(missing.as_ptr(), &mut net), GrStatus::GR_IO);
        let bad = CString::new("{not json").unwrap();
        assert_eq!(gr_network_parse(bad.as_ptr(), &mut net), GrStatus::GR_PARSE);
        assert!(!last_error().is_empty());
        assert!(net.is_null());
        assert_eq!(gr_network_num_classes(ptr::null()), 0);
        gr_network_free(ptr::null_mut());
        gr_report_free(ptr::null_mut());
    }
}

#[test]
fn verify_roundtrip() {
    let net = load("tiny_2x3x2.json");
    let targets = [1usize];
    let spec = CString::new("brightness([0,0.2])").unwrap();
    let mut opts = gr_verify_options_default();
    opts.timeout_secs = 30.0;
    let mut report = ptr::null_mut();
    unsafe {
        let s = gr_verify(net, 0, targets.as_ptr(), 1, spec.as_ptr(), &opts, &mut report);
        assert_eq!(s, GrStatus::GR_OK, "{}", last_error());
        let mut b = std::mem::zeroed::<GrBounds>();
        assert_eq!(gr_report_bounds(report, &mut b), GrStatus::GR_OK);
        assert!(b.nonrobust_lower <= b.nonrobust_upper);
        assert_eq!(b.robust_lower, b.nonrobust_lower + opts.precision);
        assert_eq!(gr_report_num_runs(report), 1);
        let mut run = std::mem::zeroed::<GrRun>();
        assert_eq!(gr_report_run(report, 0, &mut run), GrStatus::GR_OK);
        assert_eq!(run.target, 1);
        assert_eq!(gr_report_run(report, 5, &mut run), GrStatus::GR_ARGUMENT);
        let json = gr_report_to_json(report);
        assert!(!json.is_null());
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        gr_string_free(json);
        let parsed: globrob::verify::VerificationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.nonrobust.lower, b.nonrobust_lower);
        gr_report_free(report);

        let same = [0usize];
        let s = gr_verify(net, 0, same.as_ptr(), 1, spec.as_ptr(), ptr::null(), &mut report);
        assert_eq!(s, GrStatus::GR_ARGUMENT);
        let bad = CString::new("rotation([1,2])").unwrap();
        let s = gr_verify(net, 0, targets.as_ptr(), 1, bad.as_ptr(), ptr::null(), &mut report);
        assert_eq!(s, GrStatus::GR_UNSUPPORTED);
        gr_network_free(net);
    }
}

#[test]
fn header_declares_api_and_compiles() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/globrob.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["gr_network_load", "gr_verify", "gr_report_bounds", "gr_last_error", "GR_PANIC"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    // Syntax check with the system C compiler when one is installed.
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
