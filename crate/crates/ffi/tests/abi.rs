use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use regime_lq_ffi::*;

fn config(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = rlq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn load(name: &str) -> *mut RlqModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { rlq_model_from_file(config(name).as_ptr(), &mut m) }, RlqStatus::Ok);
    m
}

#[test]
fn classical_solution_through_the_abi() {
    let m = load("classical_lq.json");
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(rlq_solve(m, 2000, RlqVariant::Full, 0.0, &mut s), RlqStatus::Ok);
        let mut steps = 0;
        assert_eq!(rlq_solution_steps(s, &mut steps), RlqStatus::Ok);
        assert_eq!(steps, 2000);
        let (mut p1, mut p2) = (0.0, 0.0);
        assert_eq!(rlq_solution_node(s, 0, 1000, &mut p1, &mut p2), RlqStatus::Ok);
        assert!((p1 - 0.6422007040602892).abs() < 1e-9);
        assert_eq!(p1, p2);
        assert_eq!(rlq_solution_at(s, 0, 2.0, &mut p1, &mut p2), RlqStatus::Ok);
        assert_eq!(p1, 1.0);
        let mut v = 0.0;
        assert_eq!(rlq_solution_value(s, -2.0, 0, &mut v), RlqStatus::Ok);
        let mut p0 = 0.0;
        rlq_solution_node(s, 0, 0, &mut p0, &mut p2);
        assert_eq!(v, 4.0 * p2);
        rlq_solution_free(s);
        rlq_model_free(m);
    }
}

#[test]
fn law_controls_match_the_library() {
    let m = load("two_controls.json");
    let (mut s, mut l) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        let (mut ell, mut m1, mut m2, mut na) = (0, 0, 0, 0);
        assert_eq!(rlq_model_dims(m, &mut ell, &mut m1, &mut m2, &mut na), RlqStatus::Ok);
        assert_eq!((ell, m1, m2, na), (2, 2, 2, 2));
        assert_eq!(rlq_solve(m, 100, RlqVariant::Full, 0.0, &mut s), RlqStatus::Ok);
        assert_eq!(rlq_law_new(m, s, &mut l), RlqStatus::Ok);
        let mut u1 = [0.0; 2];
        let mut u2 = [0.0; 4];
        assert_eq!(rlq_law_control_at(l, 0.3, -1.5, 1, u1.as_mut_ptr(), 2, u2.as_mut_ptr(), 4), RlqStatus::Ok);

        let model = regime_lq::model::config::load_model(config("two_controls.json").to_str().unwrap()).unwrap();
        let sol = regime_lq::riccati::solve(
            &model,
            &regime_lq::riccati::SolverGrid::new(1.0, 100).unwrap(),
            regime_lq::riccati::Variant::Full,
        )
        .unwrap();
        let law = regime_lq::feedback::build_law(&model, &sol).unwrap();
        let (a, b) = law.control_at(0.3, -1.5, 1).unwrap();
        assert_eq!(u1, [a[0], a[1]]);
        assert_eq!(u2, [b[0][0], b[0][1], b[1][0], b[1][1]]);

        assert_eq!(
            rlq_law_control_at(l, 0.3, 1.0, 1, u1.as_mut_ptr(), 2, u2.as_mut_ptr(), 3),
            RlqStatus::InvalidArgument
        );
        assert_eq!(rlq_law_control_at(l, 2.0, 1.0, 0, u1.as_mut_ptr(), 2, u2.as_mut_ptr(), 4), RlqStatus::InvalidArgument);
        assert!(last_error().contains("outside"));
        rlq_law_free(l);
        rlq_solution_free(s);
        rlq_model_free(m);
    }
}

#[test]
fn variants_are_ordered() {
    let m = load("sign_flip.json");
    unsafe {
        let get = |v, r| {
            let mut s = ptr::null_mut();
            assert_eq!(rlq_solve(m, 100, v, r, &mut s), RlqStatus::Ok);
            let (mut p1, mut p2) = (0.0, 0.0);
            rlq_solution_node(s, 0, 0, &mut p1, &mut p2);
            rlq_solution_free(s);
            p1
        };
        let (lo, full, k1, up) = (
            get(RlqVariant::LowerBound, 0.0),
            get(RlqVariant::Full, 0.0),
            get(RlqVariant::Truncated, 0.25),
            get(RlqVariant::UpperBound, 0.0),
        );
        assert!(lo == 0.0 && lo <= full && full <= k1 && k1 <= up);
        rlq_model_free(m);
    }
}

#[test]
fn verify_returns_json_report() {
    let m = load("zero_dynamics.json");
    let opts = RlqVerifyOptions {
        grid_n: 20,
        grid_sim: 20,
        n_paths: 100,
        seed: 1,
        x: 2.0,
        regime: 0,
        n_adversaries: 9,
        workers: 1,
    };
    let std = CString::new("standard").unwrap();
    unsafe {
        let mut json = ptr::null_mut();
        let mut passed = -1;
        assert_eq!(rlq_verify(m, std.as_ptr(), 1e-6, &opts, &mut json, &mut passed), RlqStatus::Ok);
        assert_eq!(passed, 1);
        let text = CStr::from_ptr(json).to_str().unwrap();
        assert!(text.contains("\"value\": 4.0"));
        rlq_string_free(json);

        let bad = RlqVerifyOptions { regime: 5, ..opts };
        assert_eq!(rlq_verify(m, std.as_ptr(), 1e-6, &bad, &mut json, &mut passed), RlqStatus::Validation);
        rlq_model_free(m);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut m = ptr::null_mut();
        let bad = CString::new("{\"schema\": 1}").unwrap();
        assert_eq!(rlq_model_from_json(bad.as_ptr(), &mut m), RlqStatus::Validation);
        assert!(m.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(rlq_model_from_json(ptr::null(), &mut m), RlqStatus::NullPointer);
        assert_eq!(rlq_model_from_file(config("nope.json").as_ptr(), &mut m), RlqStatus::Validation);

        let m = load("case_ii.json");
        let std = CString::new("standard").unwrap();
        let two = CString::new("II").unwrap();
        let junk = CString::new("IV").unwrap();
        assert_eq!(rlq_model_validate(m, std.as_ptr(), 1e-6), RlqStatus::Validation);
        assert!(last_error().contains("R1"));
        assert_eq!(rlq_model_validate(m, two.as_ptr(), 1.0), RlqStatus::Ok);
        assert!(rlq_last_error().is_null());
        assert_eq!(rlq_model_validate(m, junk.as_ptr(), 1.0), RlqStatus::Validation);
        assert_eq!(rlq_model_validate(ptr::null(), two.as_ptr(), 1.0), RlqStatus::NullPointer);
        rlq_model_free(m);

        let m = load("sign_flip.json");
        let mut s = ptr::null_mut();
        assert_eq!(rlq_solve(m, 1, RlqVariant::Full, 0.0, &mut s), RlqStatus::Solver);
        assert!(last_error().contains("riccati"));
        assert_eq!(rlq_solve(m, 0, RlqVariant::Full, 0.0, &mut s), RlqStatus::Validation);
        rlq_model_free(m);
        rlq_model_free(ptr::null_mut());
    }
}
