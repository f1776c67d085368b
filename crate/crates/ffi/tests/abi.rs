use std::ffi::{c_char, CStr, CString};
use std::ptr;

use ccd_ffi::*;

fn last_error() -> String {
    let need = unsafe { ccd_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; need];
    unsafe { ccd_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn preset(name: &str) -> *mut CcdProblem {
    let name = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ccd_problem_from_preset(name.as_ptr(), &mut p) }, CcdStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(ccd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn preset_cost_and_grid() {
    let p = preset("case1-hom");
    let mut n = 0;
    assert_eq!(unsafe { ccd_problem_grid_size(p, &mut n) }, CcdStatus::Ok);
    assert_eq!(n, 20);
    let mut jf = 0.0;
    assert_eq!(unsafe { ccd_problem_cost(p, &mut jf) }, CcdStatus::Ok);
    assert!((jf - 276.6).abs() < 0.05, "{jf}");
    let mut m = CcdMargins { kbar: 0.0, m1: 0.0, m2: 0.0, m3: 0.0, max_re_eig: 0.0, feasible: 0 };
    assert_eq!(unsafe { ccd_problem_margins(p, &mut m) }, CcdStatus::Ok);
    assert_eq!(m.feasible, 1);
    assert_eq!(m.m3, -90.0);
    unsafe { ccd_problem_free(p) };
}

#[test]
fn gradient_zeroes_frozen_entries() {
    let p = preset("case1-hom");
    let mut g = CcdPoint { a: 1.0, b: 1.0, k1: 0.0, k2: 0.0 };
    assert_eq!(unsafe { ccd_problem_gradient(p, &mut g) }, CcdStatus::Ok);
    assert_eq!((g.a, g.b), (0.0, 0.0));
    assert!(g.k1 > 0.0);
    unsafe { ccd_problem_free(p) };
}

#[test]
fn optimize_and_walk_trace() {
    let p = preset("case1-hom");
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ccd_problem_optimize(p, &mut r) }, CcdStatus::Ok);
    let mut point = CcdPoint { a: 0.0, b: 0.0, k1: 0.0, k2: 0.0 };
    let mut jf = 0.0;
    assert_eq!(unsafe { ccd_result_optimum(r, &mut point, &mut jf) }, CcdStatus::Ok);
    assert!((point.k1 - 2.12).abs() < 0.05);
    assert!((jf - 53.77).abs() < 0.03 * 53.77);
    let mut len = 0;
    assert_eq!(unsafe { ccd_result_trace_len(r, &mut len) }, CcdStatus::Ok);
    assert!(len > 1);
    let mut row = CcdTraceRow { iter: 0, point, jf: 0.0, grad_norm: 0.0, step: 0.0, backtracks: 0 };
    assert_eq!(unsafe { ccd_result_trace_row(r, len - 1, &mut row) }, CcdStatus::Ok);
    assert_eq!(row.jf, jf);
    assert_eq!(unsafe { ccd_result_trace_row(r, len, &mut row) }, CcdStatus::OutOfRange);
    assert!(last_error().contains("out of range"));
    let mut term = CcdTermination::MaxIters;
    assert_eq!(unsafe { ccd_result_termination(r, &mut term) }, CcdStatus::Ok);
    assert_ne!(term, CcdTermination::MaxIters);
    unsafe {
        ccd_result_free(r);
        ccd_problem_free(p);
    }
}

#[test]
fn config_errors_are_reported() {
    let mut p = ptr::null_mut();
    let text = CString::new("sigma = 1.5").unwrap();
    assert_eq!(unsafe { ccd_problem_from_config(text.as_ptr(), &mut p) }, CcdStatus::Config);
    assert!(p.is_null());
    assert!(last_error().contains("sigma"));

    let text = CString::new("k2 = 5").unwrap();
    assert_eq!(unsafe { ccd_problem_from_config(text.as_ptr(), &mut p) }, CcdStatus::Infeasible);
    assert!(last_error().contains("m3"));
}

#[test]
fn null_and_bad_arguments() {
    let mut jf = 0.0;
    assert_eq!(unsafe { ccd_problem_cost(ptr::null(), &mut jf) }, CcdStatus::NullPointer);
    assert!(last_error().contains("problem"));
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ccd_problem_new(4, true, 10, &mut p) }, CcdStatus::InvalidArgument);
    assert_eq!(unsafe { ccd_problem_new(1, true, 2, &mut p) }, CcdStatus::InvalidArgument);
    unsafe {
        ccd_problem_free(ptr::null_mut());
        ccd_result_free(ptr::null_mut());
    }
}

#[test]
fn infeasible_point_cannot_be_optimized() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ccd_problem_new(1, true, 10, &mut p) }, CcdStatus::Ok);
    let bad = CcdPoint { a: 10.0, b: 0.0, k1: 7.0, k2: 5.0 };
    assert_eq!(unsafe { ccd_problem_set_point(p, bad) }, CcdStatus::Ok);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ccd_problem_optimize(p, &mut r) }, CcdStatus::Infeasible);
    assert!(r.is_null());
    let nan = CcdPoint { a: f64::NAN, ..bad };
    assert_eq!(unsafe { ccd_problem_set_point(p, nan) }, CcdStatus::InvalidArgument);
    unsafe { ccd_problem_free(p) };
}

#[test]
fn pde_cost_matches_initial_reference() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ccd_problem_new(1, true, 26, &mut p) }, CcdStatus::Ok);
    let mut c = CcdPdeCost { j_control: 0.0, j_total: 0.0, j_total_time_scaled: 0.0 };
    assert_eq!(unsafe { ccd_problem_pde_cost(p, &mut c) }, CcdStatus::Ok);
    assert!((c.j_total - 98211.0).abs() < 0.1 * 98211.0, "{}", c.j_total);
    assert_eq!(c.j_total, c.j_control);
    unsafe { ccd_problem_free(p) };
}
