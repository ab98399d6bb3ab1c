//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation or configuration error, 2 solver
//! error, 3 verification failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, ErrorClass, Result};
use crate::feedback::build_law;
use crate::model::config::load_model;
use crate::model::{validate, CaseFlags, ConeSpec, RegimeModel, SingularCase};
use crate::riccati::{lower_bound_singular, solve, solve_upper_bound, solve_with, Integrator, SolveOptions, SolverGrid, Variant};
use crate::sim::{estimate_cost, simulate_path, verify, write_trace_csv, Control, SimConfig, VerifyConfig};

#[derive(Debug, Parser)]
#[command(name = "regime-lq", version, about = "Cone-constrained regime-switching jump LQ: Riccati solver and Monte Carlo verifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the Riccati system and write P1, P2 and the feedback tables.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Use implicit Euler instead of RK4.
        #[arg(long)]
        implicit: bool,
    },
    /// Compare the full solution with truncated and bounding systems.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Truncation radii.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        k: Vec<f64>,
    },
    /// Monte Carlo cost of the optimal law (or the zero control).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: Mc,
        #[arg(long, value_enum, default_value_t = ControlChoice::Optimal)]
        control: ControlChoice,
        /// Multiply the chosen control by this factor.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Write per-path traces for the first N paths.
        #[arg(long, default_value_t = 0)]
        trace: u64,
    },
    /// Check V against simulated costs of u* and of adversarial controls.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mc: Mc,
        #[arg(long, default_value_t = 9)]
        adversaries: usize,
    },
    /// Run the built-in analytic examples.
    Selfcheck {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Model configuration (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// `standard`, `I`, `II` or `III`.
    #[arg(long, default_value = "standard")]
    pub case: String,
    /// Definiteness margin of the declared case.
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    /// Riccati solver steps.
    #[arg(long = "grid-n", default_value_t = 1000)]
    pub grid_n: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct Mc {
    #[arg(long = "grid-sim", default_value_t = 200)]
    pub grid_sim: usize,
    #[arg(long = "mc-paths", default_value_t = 10_000)]
    pub mc_paths: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub x0: f64,
    /// Initial regime, 1-based.
    #[arg(long, default_value_t = 1)]
    pub i0: usize,
    /// Worker threads (capped by REGIME_LQ_THREADS).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControlChoice {
    Optimal,
    Zero,
}

/// Exit code for an outcome class.
pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Validation => 1,
        ErrorClass::Solver => 2,
        ErrorClass::Verification => 3,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.class())
        }
    }
}

pub fn parse_flags(case: &str, delta: f64) -> Result<CaseFlags> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Config(format!("--delta must be positive, got {delta}")));
    }
    if case.eq_ignore_ascii_case("standard") {
        Ok(CaseFlags::standard(delta))
    } else {
        let c: SingularCase = case.parse()?;
        Ok(CaseFlags::singular(c, delta))
    }
}

fn load(common: &Common) -> Result<(RegimeModel, CaseFlags, SolverGrid)> {
    let model = load_model(&common.model)?;
    let flags = parse_flags(&common.case, common.delta)?;
    let report = validate(&model, &flags)?;
    std::fs::create_dir_all(&common.out)?;
    std::fs::write(common.out.join("validation.json"), serde_json::to_string_pretty(&report)?)?;
    let grid = SolverGrid::new(model.horizon(), common.grid_n)?;
    Ok((model, flags, grid))
}

fn regime_index(model: &RegimeModel, i0: usize) -> Result<usize> {
    if i0 == 0 || i0 > model.n_regimes() {
        return Err(Error::Config(format!("--i0 must be in 1..={}, got {i0}", model.n_regimes())));
    }
    Ok(i0 - 1)
}

fn sim_config(mc: &Mc) -> Result<SimConfig> {
    if mc.grid_sim == 0 || mc.mc_paths < 2 {
        return Err(Error::Config("--grid-sim must be positive and --mc-paths at least 2".into()));
    }
    Ok(SimConfig { grid_sim: mc.grid_sim, n_paths: mc.mc_paths, seed: mc.seed, workers: mc.workers })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::Solve { common, implicit } => {
            let (model, _, grid) = load(common)?;
            let opts = SolveOptions {
                integrator: if *implicit { Integrator::ImplicitEuler } else { Integrator::Rk4 },
                ..Default::default()
            };
            let sol = solve_with(&model, &grid, Variant::Full, opts)?;
            sol.export(&common.out, "riccati")?;
            let law = build_law(&model, &sol)?;
            law.write_csv(std::io::BufWriter::new(std::fs::File::create(common.out.join("feedback.csv"))?))?;
            for i in 0..model.n_regimes() {
                println!("regime {}: P1(0) = {:.16e}  P2(0) = {:.16e}", i + 1, sol.p1(i, 0), sol.p2(i, 0));
            }
            Ok(0)
        }
        Command::Bounds { common, k } => {
            let (model, flags, grid) = load(common)?;
            let report = bounds(&model, &flags, &grid, k, &common.out)?;
            write_json(&common.out.join("bounds_report.json"), &report)?;
            print!("{}", report.table());
            Ok(0)
        }
        Command::Simulate { common, mc, control, scale, trace } => {
            let (model, _, grid) = load(common)?;
            let i0 = regime_index(&model, mc.i0)?;
            let sim = sim_config(mc)?;
            let law = match control {
                ControlChoice::Optimal => Some(build_law(&model, &solve(&model, &grid, Variant::Full)?)?),
                ControlChoice::Zero => None,
            };
            let policy = match &law {
                Some(l) if *scale == 1.0 => Control::Feedback(l),
                Some(l) => Control::Scaled(l, *scale),
                None => Control::Zero,
            };
            let est = estimate_cost(&model, &policy, mc.x0, i0, &sim)?;
            for id in 0..*trace {
                let p = simulate_path(&model, &policy, mc.x0, i0, sim.grid_sim, sim.seed, id, true)?;
                let f = std::fs::File::create(common.out.join(format!("trace_{id}.csv")))?;
                write_trace_csv(p.trace.as_deref().unwrap_or(&[]), std::io::BufWriter::new(f))?;
            }
            write_json(&common.out.join("estimate.json"), &est)?;
            println!(
                "J = {:.16e}  std_error = {:.6e}  ci95 = [{:.6e}, {:.6e}]  paths = {}",
                est.mean, est.std_error, est.ci95.0, est.ci95.1, est.n_paths
            );
            Ok(0)
        }
        Command::Verify { common, mc, adversaries } => {
            let model = load_model(&common.model)?;
            let flags = parse_flags(&common.case, common.delta)?;
            let i0 = regime_index(&model, mc.i0)?;
            std::fs::create_dir_all(&common.out)?;
            let cfg = VerifyConfig { grid_n: common.grid_n, sim: sim_config(mc)?, x: mc.x0, i0, n_adversaries: *adversaries };
            let report = verify(&model, &flags, &cfg)?;
            std::fs::write(common.out.join("verification_report.json"), report.to_json()? + "\n")?;
            print!("{}", report.summary());
            Ok(if report.passed { 0 } else { 3 })
        }
        Command::Selfcheck { out } => {
            std::fs::create_dir_all(out)?;
            let checks = selfcheck()?;
            write_json(&out.join("selfcheck.json"), &checks)?;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) { 0 } else { 3 })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub radii: Vec<f64>,
    /// Rows: regime-major `(regime, component)`; columns at t = 0: lower, full, truncated..., upper.
    pub at_zero: Vec<BoundsRow>,
    pub monotone_in_k: bool,
    pub full_below_truncated: bool,
    pub below_upper: bool,
    pub above_lower: bool,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRow {
    pub regime: usize,
    pub component: u8,
    pub lower: f64,
    pub full: f64,
    pub truncated: Vec<f64>,
    pub upper: f64,
}

impl BoundsReport {
    pub fn ordered(&self) -> bool {
        self.monotone_in_k && self.full_below_truncated && self.below_upper && self.above_lower
    }

    pub fn table(&self) -> String {
        let mut s = String::from("regime comp        lower         full");
        for k in &self.radii {
            s += &format!("  {:>11}", format!("k={k}"));
        }
        s += "        upper\n";
        for r in &self.at_zero {
            s += &format!("{:>6} {:>4} {:>12.6e} {:>12.6e}", r.regime, r.component, r.lower, r.full);
            for v in &r.truncated {
                s += &format!("  {v:>11.5e}");
            }
            s += &format!(" {:>12.6e}\n", r.upper);
        }
        s += &format!(
            "ordering: monotone_in_k={} full<=truncated={} P<=upper={} P>=lower={} ({})\n",
            self.monotone_in_k,
            self.full_below_truncated,
            self.below_upper,
            self.above_lower,
            if self.ordered() { "PASS" } else { "FAIL" }
        );
        s
    }
}

const ORDER_TOL: f64 = 1e-8;

/// Solves every variant, exports them and checks their nodewise ordering.
pub fn bounds(model: &RegimeModel, flags: &CaseFlags, grid: &SolverGrid, radii: &[f64], out: &Path) -> Result<BoundsReport> {
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    let full = solve(model, grid, Variant::Full)?;
    full.export(out, "full")?;
    let upper = solve_upper_bound(model, grid)?;
    upper.export(out, "upper_bound")?;
    let mut truncated = Vec::with_capacity(radii.len());
    for &k in &radii {
        let s = solve(model, grid, Variant::Truncated(k))?;
        s.export(out, &format!("truncated_k{k}"))?;
        truncated.push(s);
    }
    let singular = match flags.singular_case {
        Some(_) => Some(lower_bound_singular(flags, model)?),
        None => None,
    };
    let lower_at = |t: f64| singular.map_or(0.0, |lb| lb.at(t));

    let mut max_violation: f64 = 0.0;
    let (mut monotone, mut full_below, mut below_upper, mut above_lower) = (true, true, true, true);
    let mut check = |flag: &mut bool, excess: f64| {
        if excess > ORDER_TOL {
            *flag = false;
        }
        max_violation = max_violation.max(excess);
    };
    let ell = model.n_regimes();
    for i in 0..ell {
        for n in 0..=grid.steps {
            let t = grid.node(n);
            for (p, pbar, c) in [
                (full.p1(i, n), upper.p1(i, n), 1u8),
                (full.p2(i, n), upper.p2(i, n), 2u8),
            ] {
                let comp = |s: &crate::riccati::RiccatiSolution| if c == 1 { s.p1(i, n) } else { s.p2(i, n) };
                check(&mut below_upper, p - pbar);
                check(&mut above_lower, lower_at(t) - p);
                for w in truncated.windows(2) {
                    check(&mut monotone, comp(&w[1]) - comp(&w[0]));
                }
                if let Some(last) = truncated.last() {
                    check(&mut full_below, p - comp(last));
                }
            }
        }
    }
    let mut at_zero = Vec::new();
    for i in 0..ell {
        for c in [1u8, 2u8] {
            let pick = |s: &crate::riccati::RiccatiSolution| if c == 1 { s.p1(i, 0) } else { s.p2(i, 0) };
            at_zero.push(BoundsRow {
                regime: i + 1,
                component: c,
                lower: lower_at(0.0),
                full: pick(&full),
                truncated: truncated.iter().map(pick).collect(),
                upper: pick(&upper),
            });
        }
    }
    Ok(BoundsReport {
        radii,
        at_zero,
        monotone_in_k: monotone,
        full_below_truncated: full_below,
        below_upper,
        above_lower,
        max_violation,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Classical-LQ reduction, symmetry collapse and zero-model checks.
pub fn selfcheck() -> Result<Vec<SelfCheck>> {
    let mut out = Vec::new();

    let m = crate::presets::classical_lq(2.0)?;
    let sol = solve(&m, &SolverGrid::new(2.0, 2000)?, Variant::Full)?;
    let mut worst: f64 = 0.0;
    for n in (0..=2000).step_by(200) {
        let t = 2.0 * n as f64 / 2000.0;
        let p = sol.p1(0, n);
        worst = worst.max((p.ln() - 1.0 / p - (t - 3.0)).abs());
    }
    out.push(SelfCheck {
        name: "classical-lq".into(),
        passed: worst <= 1e-4,
        detail: format!("max |ln P - 1/P - (t - T - 1)| = {worst:.3e}, P(T-1) = {:.6}", sol.p1(0, 1000)),
    });

    let m = crate::presets::sign_flip_with(ConeSpec::full_space(1), ConeSpec::full_space(1))?;
    let sol = solve(&m, &SolverGrid::new(1.0, 400)?, Variant::Full)?;
    out.push(SelfCheck {
        name: "symmetry-collapse".into(),
        passed: sol.asymmetry() <= 1e-10,
        detail: format!("max |P1 - P2| = {:.3e}", sol.asymmetry()),
    });

    let r = crate::presets::ScalarRegime { a: 0.3, b1: 1.0, c: 0.4, d: 0.5, r1: 1.0, b2: 0.2, e: -1.5, f: 0.6, r2: 1.0, ..Default::default() };
    let m = crate::presets::scalar_model(1.0, &[&[0.0]], &[0.5], &[r], ConeSpec::full_space(1), ConeSpec::nonnegative_orthant(1))?;
    let sol = solve(&m, &SolverGrid::new(1.0, 100)?, Variant::Full)?;
    let zero = solve(&m, &SolverGrid::new(1.0, 100)?, Variant::LowerBound)?;
    let d = sol.sup_distance(&zero);
    out.push(SelfCheck { name: "zero-model".into(), passed: d == 0.0, detail: format!("sup |P| = {d:.3e}") });

    let m = crate::presets::zero_dynamics(1.0, 1.0)?;
    let cfg = VerifyConfig {
        grid_n: 20,
        sim: SimConfig { grid_sim: 20, n_paths: 100, seed: 0, workers: Some(1) },
        x: 2.0,
        i0: 0,
        n_adversaries: 9,
    };
    let rep = verify(&m, &CaseFlags::standard(1.0), &cfg)?;
    out.push(SelfCheck {
        name: "zero-dynamics-verify".into(),
        passed: rep.passed && rep.value == 4.0 && rep.optimal.mean == 4.0,
        detail: format!("V = {:.3}, J(u*) = {:.3}", rep.value, rep.optimal.mean),
    });
    Ok(out)
}
