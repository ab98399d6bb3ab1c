use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::rng::{path_rng, Stream};
use super::{estimate_cost, Control, McEstimate, SimConfig};
use crate::error::{Error, Result};
use crate::feedback::build_law;
use crate::model::{validate, CaseFlags, RegimeModel};
use crate::riccati::{solve, SolverGrid, Variant};

/// Scale factors `1 + ε` of the scaled adversaries.
const SCALES: [f64; 4] = [1.25, 0.75, 1.5, 0.5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    /// Riccati solver steps.
    pub grid_n: usize,
    pub sim: SimConfig,
    pub x: f64,
    /// 0-based initial regime.
    pub i0: usize,
    pub n_adversaries: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { grid_n: 1000, sim: SimConfig::default(), x: 1.0, i0: 0, n_adversaries: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversaryResult {
    pub label: String,
    pub estimate: McEstimate,
    /// `(Ĵ(u) - V) / std_error(u)`
    pub excess_se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub x: f64,
    /// 1-based.
    pub regime: usize,
    pub grid_n: usize,
    pub grid_sim: usize,
    pub n_paths: u64,
    pub seed: u64,
    pub p1_0: f64,
    pub p2_0: f64,
    pub value: f64,
    pub bias_allowance: f64,
    pub optimal: McEstimate,
    pub optimal_gap: f64,
    pub optimal_pass: bool,
    pub adversaries: Vec<AdversaryResult>,
    pub max_adversary_excess_se: f64,
    pub passed: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `Ok(self)` on PASS, `VerificationFailed` naming the offending statistic otherwise.
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            return Ok(self);
        }
        if !self.optimal_pass {
            return Err(Error::VerificationFailed(format!(
                "|J(u*) - V| = {:e} exceeds 3*se + bias = {:e}",
                self.optimal_gap.abs(),
                3.0 * self.optimal.std_error + self.bias_allowance
            )));
        }
        let bad = self.adversaries.iter().find(|a| !a.pass).map_or("?", |a| a.label.as_str());
        Err(Error::VerificationFailed(format!("adversary {bad} beats V by more than 3 standard errors")))
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "V = {:.6} (P1(0) = {:.6}, P2(0) = {:.6})\nJ(u*) = {:.6} +/- {:.6} (gap {:+.3e}, bias allowance {:.3e}) {}\n",
            self.value,
            self.p1_0,
            self.p2_0,
            self.optimal.mean,
            self.optimal.std_error,
            self.optimal_gap,
            self.bias_allowance,
            pass_word(self.optimal_pass)
        );
        for a in &self.adversaries {
            s += &format!(
                "  {:<16} J = {:.6} +/- {:.6} ({:+.1} se) {}\n",
                a.label,
                a.estimate.mean,
                a.estimate.std_error,
                a.excess_se,
                pass_word(a.pass)
            );
        }
        s += &format!("verdict: {}\n", pass_word(self.passed));
        s
    }
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Random direction in Π1 with norm in `[0.25, 2]`; zero if the cone is `{0}`.
fn ray_direction(model: &RegimeModel, seed: u64, k: u64) -> Result<DVector<f64>> {
    let mut rng = path_rng(seed, Stream::Adversary, k);
    let m1 = model.dims().m1;
    for _ in 0..64 {
        let g = DVector::from_fn(m1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let p = model.pi1().project(&g)?;
        let n = p.norm();
        if n > 1e-8 {
            let len = 0.25 + 1.75 * rng.random::<f64>();
            return Ok(p * (len / n));
        }
        if model.pi1().is_zero() {
            break;
        }
    }
    Ok(DVector::zeros(m1))
}

/// Checks the predicted value against simulated costs of the optimal law and
/// of admissible adversaries, all on common random numbers.
pub fn verify(model: &RegimeModel, flags: &CaseFlags, cfg: &VerifyConfig) -> Result<VerificationReport> {
    validate(model, flags)?;
    if cfg.i0 >= model.n_regimes() {
        return Err(Error::Config(format!("initial regime {} out of range 1..={}", cfg.i0 + 1, model.n_regimes())));
    }
    let grid = SolverGrid::new(model.horizon(), cfg.grid_n)?;
    let sol = solve(model, &grid, Variant::Full)?;
    let law = build_law(model, &sol)?;
    let value = sol.value(cfg.x, cfg.i0);
    let x2 = cfg.x * cfg.x;
    let bias_allowance = 2.0 * (model.horizon() / cfg.sim.grid_sim as f64) * sol.meta().max_drift * x2;

    let optimal = estimate_cost(model, &Control::Feedback(&law), cfg.x, cfg.i0, &cfg.sim)?;
    let optimal_gap = optimal.mean - value;
    let optimal_pass = optimal_gap.abs() <= 3.0 * optimal.std_error + bias_allowance;

    let mut labelled: Vec<(String, Control<'_>)> = Vec::new();
    let mut rays = Vec::new();
    for k in 0..cfg.n_adversaries {
        if k < SCALES.len() {
            labelled.push((format!("scaled({:+})", SCALES[k] - 1.0), Control::Scaled(&law, SCALES[k])));
        } else if k == SCALES.len() {
            labelled.push(("zero".into(), Control::Zero));
        } else {
            rays.push(ray_direction(model, cfg.sim.seed, k as u64)?);
        }
    }
    for (r, v) in rays.iter().enumerate() {
        labelled.push((format!("ray#{}", r + 1), Control::Ray(v)));
    }

    let mut adversaries = Vec::with_capacity(labelled.len());
    for (label, control) in labelled {
        let estimate = estimate_cost(model, &control, cfg.x, cfg.i0, &cfg.sim)?;
        let diff = estimate.mean - value;
        let excess_se = if estimate.std_error > 0.0 {
            diff / estimate.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        let pass = estimate.mean >= value - 3.0 * estimate.std_error;
        adversaries.push(AdversaryResult { label, estimate, excess_se, pass });
    }
    let max_adversary_excess_se = adversaries.iter().map(|a| a.excess_se).fold(f64::NEG_INFINITY, f64::max);
    let passed = optimal_pass && adversaries.iter().all(|a| a.pass);

    Ok(VerificationReport {
        x: cfg.x,
        regime: cfg.i0 + 1,
        grid_n: cfg.grid_n,
        grid_sim: cfg.sim.grid_sim,
        n_paths: cfg.sim.n_paths,
        seed: cfg.sim.seed,
        p1_0: sol.p1(cfg.i0, 0),
        p2_0: sol.p2(cfg.i0, 0),
        value,
        bias_allowance,
        optimal,
        optimal_gap,
        optimal_pass,
        adversaries,
        max_adversary_excess_se,
        passed,
    })
}
