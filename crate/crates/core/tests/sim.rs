use regime_lq::feedback::build_law;
use regime_lq::model::{CaseFlags, ConeSpec, RegimeModel};
use regime_lq::presets::{self, ScalarRegime};
use regime_lq::riccati::{solve, SolverGrid, Variant};
use regime_lq::sim::{
    estimate_cost, simulate_path, verify, write_trace_csv, Control, McEstimate, SimConfig, TraceEvent, VerifyConfig,
};
use regime_lq::Error;

fn one_regime(r: ScalarRegime, weights: &[f64], horizon: f64) -> RegimeModel {
    presets::scalar_model(horizon, &[&[0.0]], weights, &[r], ConeSpec::full_space(1), ConeSpec::full_space(1)).unwrap()
}

fn cfg(n_paths: u64, seed: u64) -> SimConfig {
    SimConfig { grid_sim: 200, n_paths, seed, workers: Some(2) }
}

#[test]
fn zero_dynamics_keep_state_and_cost() {
    let m = one_regime(ScalarRegime { g: 1.0, ..Default::default() }, &[1.0], 1.0);
    for id in 0..20 {
        let p = simulate_path(&m, &Control::Zero, 2.0, 0, 50, 3, id, true).unwrap();
        assert_eq!(p.x_terminal, 2.0);
        assert!(p.trace.unwrap().iter().all(|r| r.x == 2.0));
    }
    let e = estimate_cost(&m, &Control::Zero, 2.0, 0, &cfg(100, 1)).unwrap();
    assert_eq!(e.mean, 4.0);
    assert_eq!(e.std_error, 0.0);
}

#[test]
fn deterministic_running_cost_integrates_exactly() {
    let m = one_regime(ScalarRegime { q: 1.0, ..Default::default() }, &[], 2.0);
    let e = estimate_cost(&m, &Control::Zero, 3.0, 0, &cfg(10, 1)).unwrap();
    assert!((e.mean - 18.0).abs() < 1e-12);
}

#[test]
fn linear_growth_matches_exponential_to_euler_order() {
    let m = one_regime(ScalarRegime { a: 1.0, ..Default::default() }, &[], 1.0);
    let err = |n| (simulate_path(&m, &Control::Zero, 1.0, 0, n, 0, 0, false).unwrap().x_terminal - 1f64.exp()).abs();
    let (e1, e2) = (err(200), err(400));
    assert!(e1 < 1e-2);
    assert!((e1 / e2 - 2.0).abs() < 0.05);
}

#[test]
fn sign_flipping_jump_without_control() {
    let m = one_regime(ScalarRegime { e: -1.5, ..Default::default() }, &[0.7], 3.0);
    let mut seen = 0;
    for id in 0..50 {
        let p = simulate_path(&m, &Control::Zero, 1.0, 0, 60, 9, id, true).unwrap();
        let rows = p.trace.unwrap();
        for w in rows.windows(2) {
            if let TraceEvent::Jump { .. } = w[1].event {
                // Euler step with the compensator drift 1.5*0.7*X, then X -> (1 + E) X.
                let dt = w[1].t - w[0].t;
                let expected = -0.5 * w[0].x * (1.0 + 1.5 * 0.7 * dt);
                assert!((w[1].x - expected).abs() <= 1e-12 * expected.abs());
                seen += 1;
            }
        }
    }
    assert!(seen > 20);
}

#[test]
fn compensated_dynamics_are_a_martingale() {
    let m = one_regime(ScalarRegime { c: 0.5, e: -0.5, ..Default::default() }, &[1.0], 1.0);
    let n = 20_000;
    let xs: Vec<f64> =
        (0..n).map(|id| simulate_path(&m, &Control::Zero, 1.0, 0, 50, 4, id, false).unwrap().x_terminal).collect();
    let est = McEstimate::from_samples(&xs, 0);
    assert!((est.mean - 1.0).abs() <= 3.0 * est.std_error, "{est:?}");
}

#[test]
fn std_error_halves_with_four_times_the_paths() {
    let m = presets::sign_flip().unwrap();
    let law = build_law(&m, &solve(&m, &SolverGrid::new(1.0, 100).unwrap(), Variant::Full).unwrap()).unwrap();
    let mut ratios = Vec::new();
    for rep in 0..10 {
        let small = estimate_cost(&m, &Control::Feedback(&law), 1.0, 0, &SimConfig { grid_sim: 50, ..cfg(400, rep) }).unwrap();
        let large =
            estimate_cost(&m, &Control::Feedback(&law), 1.0, 0, &SimConfig { grid_sim: 50, ..cfg(1600, 100 + rep) }).unwrap();
        ratios.push(large.std_error / small.std_error);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((0.4..=0.6).contains(&mean), "{ratios:?}");
}

#[test]
fn estimates_are_reproducible_across_worker_counts() {
    let m = presets::sign_flip().unwrap();
    let law = build_law(&m, &solve(&m, &SolverGrid::new(1.0, 50).unwrap(), Variant::Full).unwrap()).unwrap();
    let run = |w| {
        estimate_cost(&m, &Control::Feedback(&law), -0.7, 1, &SimConfig { workers: Some(w), ..cfg(3000, 17) }).unwrap()
    };
    let a = run(1);
    assert_eq!(a, run(1));
    assert_eq!(a.mean.to_bits(), run(3).mean.to_bits());
    assert_eq!(a.std_error.to_bits(), run(5).std_error.to_bits());
}

#[test]
fn path_costs_are_nonnegative() {
    let m = presets::sign_flip().unwrap();
    let law = build_law(&m, &solve(&m, &SolverGrid::new(1.0, 50).unwrap(), Variant::Full).unwrap()).unwrap();
    for id in 0..300 {
        let p = simulate_path(&m, &Control::Scaled(&law, 1.5), 1.3, 0, 100, 2, id, false).unwrap();
        assert!(p.cost >= 0.0);
    }
}

#[test]
fn regime_trajectory_is_right_continuous() {
    let m = presets::sign_flip().unwrap();
    let p = simulate_path(&m, &Control::Zero, 1.0, 0, 20, 8, 5, true).unwrap();
    let r = &p.regimes;
    assert_eq!(r.epochs[0], 0.0);
    assert!(r.epochs.windows(2).all(|w| w[0] < w[1]));
    assert!(r.states.windows(2).all(|w| w[0] != w[1]));
    for (k, &e) in r.epochs.iter().enumerate() {
        assert_eq!(r.state_at(e), r.states[k]);
    }
}

#[test]
fn explosive_paths_are_reported() {
    let m = one_regime(ScalarRegime { a: 40.0, ..Default::default() }, &[], 1.0);
    let err = simulate_path(&m, &Control::Zero, 1.0, 0, 100, 0, 0, false).unwrap_err();
    assert!(matches!(err, Error::ExplodedPath { path_id: 0, .. }));
    let err = estimate_cost(&m, &Control::Zero, 1.0, 0, &cfg(10, 0)).unwrap_err();
    assert!(matches!(err, Error::TooManyExploded { exploded: 10, n_paths: 10 }));
}

#[test]
fn input_checks() {
    let m = presets::sign_flip().unwrap();
    assert!(matches!(estimate_cost(&m, &Control::Zero, 1.0, 0, &cfg(1, 0)), Err(Error::Config(_))));
    assert!(matches!(estimate_cost(&m, &Control::Zero, 1.0, 2, &cfg(10, 0)), Err(Error::Config(_))));
}

#[test]
fn trace_csv_has_header_and_events() {
    let m = presets::sign_flip().unwrap();
    let p = simulate_path(&m, &Control::Zero, 1.0, 0, 10, 1, 3, true).unwrap();
    let mut buf = Vec::new();
    write_trace_csv(p.trace.as_ref().unwrap(), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,x,regime,u1_1,event\n"));
    assert_eq!(text.lines().count(), 1 + p.trace.unwrap().len());
}

#[test]
fn verify_zero_dynamics() {
    let m = presets::zero_dynamics(1.0, 1.0).unwrap();
    let vc = VerifyConfig { grid_n: 20, sim: cfg(200, 5), x: 2.0, i0: 0, n_adversaries: 9 };
    let r = verify(&m, &CaseFlags::standard(1.0), &vc).unwrap();
    assert_eq!(r.value, 4.0);
    assert_eq!(r.optimal.mean, 4.0);
    assert_eq!(r.adversaries.len(), 9);
    assert!(r.adversaries.iter().all(|a| a.estimate.mean >= 4.0));
    assert!(r.passed);
}

#[test]
fn verify_classical_lq() {
    let m = presets::classical_lq(1.0).unwrap();
    let vc = VerifyConfig { grid_n: 500, sim: cfg(20_000, 11), x: 1.0, i0: 0, n_adversaries: 6 };
    let r = verify(&m, &CaseFlags::standard(1.0), &vc).unwrap();
    assert!(r.optimal_pass, "{}", r.summary());
    assert!(r.passed, "{}", r.summary());
    assert!((r.optimal.mean - r.value).abs() <= 3.0 * r.optimal.std_error + r.bias_allowance);
}

#[test]
fn verify_symmetric_value_in_sign_of_state() {
    let m = presets::sign_flip_with(ConeSpec::full_space(1), ConeSpec::full_space(1)).unwrap();
    let flags = CaseFlags::standard(0.5);
    let base = VerifyConfig { grid_n: 200, sim: cfg(5000, 2), x: 1.0, i0: 0, n_adversaries: 5 };
    let pos = verify(&m, &flags, &base).unwrap();
    let neg = verify(&m, &flags, &VerifyConfig { x: -1.0, ..base }).unwrap();
    assert_eq!(pos.value, neg.value);
    let tol = 3.0 * (pos.optimal.std_error.powi(2) + neg.optimal.std_error.powi(2)).sqrt();
    assert!((pos.optimal.mean - neg.optimal.mean).abs() <= tol);
}

#[test]
fn failed_report_becomes_error() {
    let m = presets::zero_dynamics(1.0, 1.0).unwrap();
    let vc = VerifyConfig { grid_n: 10, sim: cfg(50, 5), x: 1.0, i0: 0, n_adversaries: 2 };
    let mut r = verify(&m, &CaseFlags::standard(1.0), &vc).unwrap();
    assert!(r.clone().into_result().is_ok());
    r.passed = false;
    r.optimal_pass = false;
    assert!(matches!(r.into_result(), Err(Error::VerificationFailed(_))));
}

#[test]
fn verify_report_serializes() {
    let m = presets::sign_flip().unwrap();
    let vc = VerifyConfig { grid_n: 50, sim: cfg(500, 5), x: 1.0, i0: 1, n_adversaries: 9 };
    let r = verify(&m, &CaseFlags::standard(0.5), &vc).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(v["regime"], 2);
    assert_eq!(v["adversaries"].as_array().unwrap().len(), 9);
    assert!(r.summary().contains("verdict"));
}
