use std::ffi::{CStr, CString};
use std::ptr;

use renege_ffi::*;

fn source(json: &str) -> *mut RenegeSource {
    let c = CString::new(json).unwrap();
    let mut src = ptr::null_mut();
    assert_eq!(unsafe { renege_source_from_json(c.as_ptr(), &mut src) }, RenegeStatus::Ok);
    assert!(!src.is_null());
    src
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(renege_last_error()) }.to_str().unwrap().to_owned()
}

const DET: &str = r#"{"kind": "deterministic", "xi": 1.0, "sigma": 0.6, "dpat": 0.3}"#;
const EXPO: &str = r#"{"kind": "iid", "seed": 9,
    "xi": {"dist": "exponential", "rate": 1.0},
    "sigma": {"dist": "exponential", "rate": 1.25},
    "dpat": {"dist": "exponential", "rate": 1.0}}"#;

#[test]
fn steps_match_hand_values() {
    let mark = RenegeMark { xi: 1.0, sigma: 0.6, dpat: 0.3 };
    let mut v = f64::NAN;
    unsafe {
        assert_eq!(renege_fifo_step(0.0, &mark, &mut v), RenegeStatus::Ok);
        assert_eq!(v, 0.0);
        assert_eq!(renege_fifo_step(1.2, &mark, &mut v), RenegeStatus::Ok);
        assert!((v - 0.2).abs() < 1e-15);
        assert_eq!(renege_end_step(0.2, &mark, &mut v), RenegeStatus::Ok);
        assert_eq!(v, 0.0);
    }
}

#[test]
fn invalid_inputs_report_status_and_message() {
    let mark = RenegeMark { xi: 1.0, sigma: -1.0, dpat: 0.3 };
    let mut v = 0.0;
    assert_eq!(unsafe { renege_fifo_step(0.0, &mark, &mut v) }, RenegeStatus::InvalidArgument);
    assert!(last_error().contains("sigma"), "{}", last_error());
    assert_eq!(unsafe { renege_fifo_step(-1.0, &RenegeMark { xi: 1.0, sigma: 1.0, dpat: 1.0 }, &mut v) }, RenegeStatus::InvalidArgument);
    assert_eq!(unsafe { renege_fifo_step(0.0, ptr::null(), &mut v) }, RenegeStatus::NullPointer);
    let bad = CString::new(r#"{"kind": "weird"}"#).unwrap();
    let mut src = ptr::null_mut();
    assert_eq!(unsafe { renege_source_from_json(bad.as_ptr(), &mut src) }, RenegeStatus::InvalidSource);
    assert!(src.is_null());
}

#[test]
fn source_marks_and_shift() {
    let src = source(EXPO);
    let mut shifted = ptr::null_mut();
    let (mut a, mut b) = (RenegeMark { xi: 0.0, sigma: 0.0, dpat: 0.0 }, RenegeMark { xi: 0.0, sigma: 0.0, dpat: 0.0 });
    unsafe {
        assert_eq!(renege_source_shift(src, 5, &mut shifted), RenegeStatus::Ok);
        assert_eq!(renege_mark_at(src, 7, &mut a), RenegeStatus::Ok);
        assert_eq!(renege_mark_at(shifted, 2, &mut b), RenegeStatus::Ok);
        renege_source_free(shifted);
        renege_source_free(src);
        renege_source_free(ptr::null_mut());
    }
    assert_eq!(a, b);
    assert!(a.xi > 0.0);
}

#[test]
fn exact_requests_need_bounds() {
    let src = source(EXPO);
    let opts = RenegeSampleOptions { exact: 1, max_epochs: 1000, max_depth: 1000, warmup: 0 };
    let mut v = 0.0;
    let st = unsafe { renege_sample_stationary(src, RenegeModel::Begin, &opts, &mut v) };
    assert_eq!(st, RenegeStatus::Capability);
    assert!(last_error().contains("bounds.sigma and bounds.dpat"), "{}", last_error());
    let mut exact = 2u8;
    let st = unsafe { renege_backward_supremum(src, RenegeAlpha::DOnly, 0, 1000, 0, &mut v, &mut exact) };
    assert_eq!(st, RenegeStatus::Ok);
    assert!(v >= 0.0 && exact <= 1);
    unsafe { renege_source_free(src) };
}

#[test]
fn deterministic_loss_and_samples() {
    let src = source(DET);
    let opts = RenegeSampleOptions { exact: 1, max_epochs: 100, max_depth: 100, warmup: 0 };
    let mut w = f64::NAN;
    let mut loss = std::mem::MaybeUninit::<RenegeLoss>::uninit();
    unsafe {
        assert_eq!(renege_sample_stationary(src, RenegeModel::Begin, &opts, &mut w), RenegeStatus::Ok);
        assert_eq!(renege_loss(src, RenegeModel::End, 20, &opts, loss.as_mut_ptr()), RenegeStatus::Ok);
        renege_source_free(src);
    }
    let loss = unsafe { loss.assume_init() };
    assert_eq!(w, 0.0);
    assert_eq!(loss.pi_hat.point, 1.0);
    assert_eq!(loss.bracket_ok, 1);
}

#[test]
fn oracle_and_ks() {
    let (mut ab, mut bl) = (0.0, 0.0);
    assert_eq!(unsafe { renege_birth_death(1.0, 1.0, 1.0, &mut ab, &mut bl) }, RenegeStatus::Ok);
    assert!((ab - (-1.0f64).exp()).abs() < 1e-10);
    assert!((bl - 0.5).abs() < 1e-15);
    let a = [0.1, 0.2, 0.3];
    let b = [0.7, 0.8];
    let mut d = 0.0;
    assert_eq!(unsafe { renege_ks_two_sample(a.as_ptr(), 3, b.as_ptr(), 2, &mut d) }, RenegeStatus::Ok);
    assert_eq!(d, 1.0);
    assert_eq!(unsafe { renege_ks_two_sample(a.as_ptr(), 0, b.as_ptr(), 2, &mut d) }, RenegeStatus::InvalidArgument);
}

#[test]
fn header_declares_the_interface() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/renege.h")).unwrap();
    for name in ["renege_source_from_json", "renege_loss", "renege_last_error", "RENEGE_STATUS_CAPABILITY", "typedef struct RenegeSource RenegeSource"] {
        assert!(h.contains(name), "{name}");
    }
    assert!(!unsafe { CStr::from_ptr(renege_version()) }.to_bytes().is_empty());
}
