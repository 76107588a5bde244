use std::ffi::{c_char, CStr, CString};
use std::ptr;

use powertrain_sizing::config::ToolkitConfig;
use powertrain_sizing::oracle::{oracle_loss, MotorDesign, MotorTechSpec};
use powertrain_sizing::pipeline::{cmd_fit, cmd_sample};
use ptsize_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { pts_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn oracle_loss_matches_core() {
    let mut out = 0.0;
    let s = unsafe { pts_oracle_loss(100e3, 2.0, 500.0, 150.0, &mut out) };
    assert_eq!(s, PtsStatus::Ok);
    let expected = oracle_loss(
        &MotorTechSpec::default(),
        &MotorDesign::new(100e3, 2.0),
        500.0,
        150.0,
    )
    .unwrap();
    assert_eq!(out, expected);
}

#[test]
fn outside_envelope_sets_message() {
    let mut out = 0.0;
    let s = unsafe { pts_oracle_loss(100e3, 2.0, 500.0, 1e4, &mut out) };
    assert_eq!(s, PtsStatus::OutsideEnvelope);
    assert!(last_error().contains("envelope"));
}

#[test]
fn null_arguments_are_rejected() {
    assert_eq!(
        unsafe { pts_oracle_loss(1e5, 2.0, 1.0, 1.0, ptr::null_mut()) },
        PtsStatus::NullArgument
    );
    assert!(last_error().contains("out_loss"));
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { pts_surrogate_from_json(ptr::null(), &mut s) },
        PtsStatus::NullArgument
    );
    unsafe {
        pts_surrogate_free(ptr::null_mut());
        pts_problem_free(ptr::null_mut());
    }
}

#[test]
fn truncated_error_buffer_is_terminated() {
    let bad = CString::new("{not json").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { pts_surrogate_from_json(bad.as_ptr(), &mut s) },
        PtsStatus::Parse
    );
    assert!(s.is_null());
    let mut buf = [0x7f as c_char; 4];
    let n = unsafe { pts_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 3);
    assert_eq!(buf[3], 0);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(pts_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn bundle_round_trip_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ToolkitConfig::default();
    cfg.report.map_omega = 5;
    cfg.report.map_torque = 5;
    cmd_sample(&cfg, dir.path()).unwrap();
    cmd_fit(&cfg, dir.path()).unwrap();
    let out_dir = CString::new(dir.path().to_str().unwrap()).unwrap();

    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { pts_surrogate_load(out_dir.as_ptr(), &mut s) },
        PtsStatus::Ok
    );
    let mut loss = -1.0;
    assert_eq!(
        unsafe { pts_surrogate_predict_loss(s, 300.0, 120e3, 2.0, 30e3, &mut loss) },
        PtsStatus::Ok
    );
    assert!(loss > 0.0);
    unsafe { pts_surrogate_free(s) };

    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { pts_problem_load(ptr::null(), out_dir.as_ptr(), &mut p) },
        PtsStatus::Ok
    );
    let design = PtsDesign {
        p_rated: 145e3,
        lambda: 3.49,
        gamma_fgt: 5.8,
    };
    let (mut de, mut feasible) = (0.0, -1);
    assert_eq!(
        unsafe { pts_problem_objective(p, design, &mut de, &mut feasible) },
        PtsStatus::Ok
    );
    assert!((10e6..40e6).contains(&de));
    assert_eq!(feasible, 1);
    let mut best = PtsDesign {
        p_rated: 0.0,
        lambda: 0.0,
        gamma_fgt: 0.0,
    };
    let mut best_e = 0.0;
    assert_eq!(
        unsafe { pts_problem_solve(p, 2, 5, 0, &mut best, &mut best_e) },
        PtsStatus::Ok
    );
    assert!(best_e <= de);
    unsafe { pts_problem_free(p) };
}

#[test]
fn missing_bundle_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { pts_problem_load(ptr::null(), out_dir.as_ptr(), &mut p) },
        PtsStatus::Io
    );
    assert!(last_error().contains("ptsize fit"));
}
