use std::path::{Path, PathBuf};

use regime_lq::model::config::load_model;
use regime_lq::model::{validate, CaseFlags};
use regime_lq::presets;
use regime_lq::riccati::{solve, SolverGrid, Variant};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn same_solution(file: &str, preset: regime_lq::model::RegimeModel) {
    let loaded = load_model(config(file)).unwrap();
    assert_eq!(loaded.horizon(), preset.horizon());
    let grid = SolverGrid::new(preset.horizon(), 100).unwrap();
    let a = solve(&loaded, &grid, Variant::Full).unwrap();
    let b = solve(&preset, &grid, Variant::Full).unwrap();
    assert_eq!(a.sup_distance(&b), 0.0, "{file}");
}

#[test]
fn shipped_configs_match_presets() {
    same_solution("classical_lq.json", presets::classical_lq(2.0).unwrap());
    same_solution("zero_dynamics.json", presets::zero_dynamics(1.0, 1.0).unwrap());
    same_solution("sign_flip.json", presets::sign_flip().unwrap());
    same_solution("case_ii.json", presets::case_ii().unwrap().0);
}

#[test]
fn shipped_configs_validate() {
    for (file, flags) in [
        ("classical_lq.json", CaseFlags::standard(1e-6)),
        ("zero_dynamics.json", CaseFlags::standard(1e-6)),
        ("sign_flip.json", CaseFlags::standard(0.5)),
        ("two_controls.json", CaseFlags::standard(0.5)),
        ("case_ii.json", presets::case_ii().unwrap().1),
    ] {
        validate(&load_model(config(file)).unwrap(), &flags).unwrap_or_else(|e| panic!("{file}: {e}"));
    }
}
