//! Backward integration of the coupled 2ℓ-dimensional Riccati system for
//! time-deterministic coefficients.
//!
//! With coefficients that depend only on (t, regime, mark), the martingale
//! parts vanish and each pair `(P1ⁱ, P2ⁱ)` solves
//!
//! ```text
//! -dP1ⁱ/dt = (2A+|C|²)P1ⁱ + Q + H11*(P1ⁱ) + Σ_z ν(z) H12*(z, P1ⁱ, P2ⁱ) + Σ_j q_ij P1ʲ
//! -dP2ⁱ/dt = (2A+|C|²)P2ⁱ + Q + H21*(P2ⁱ) + Σ_z ν(z) H22*(z, P1ⁱ, P2ⁱ) + Σ_j q_ij P2ʲ
//! ```
//!
//! with `P(T) = G`. The truncated variant restricts every infimum to
//! `|v| ≤ k`; the upper-bound variant replaces the infima by their values at
//! `v = 0`; the lower-bound variant drops `Q` and the Hamiltonians altogether
//! and starts from zero.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result, Site};
use crate::hamiltonians::{minimize_objective, MinimizeOptions, Objective, RiccatiPoint, Which};
use crate::model::{min_eigenvalue, CaseFlags, RegimeModel, SingularCase};

/// Stage values of P down to this much below zero are clamped to 0.
pub const NEGATIVE_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl SolverGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("solver grid needs at least one step".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Config(format!("solver horizon must be positive, got {horizon}")));
        }
        Ok(Self { horizon, steps })
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, n: usize) -> f64 {
        if n >= self.steps {
            self.horizon
        } else {
            n as f64 * self.step()
        }
    }

    /// Index of the last node at or before `t` (nodes hit within 1e-12 count as reached).
    pub fn index_at(&self, t: f64) -> usize {
        let x = t / self.step();
        let r = x.round();
        let n = if (x - r).abs() <= 1e-12 * x.abs().max(1.0) { r } else { x.floor() };
        (n.max(0.0) as usize).min(self.steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "radius", rename_all = "snake_case")]
pub enum Variant {
    Full,
    Truncated(f64),
    UpperBound,
    LowerBound,
}

impl Variant {
    fn radius(self) -> Option<f64> {
        match self {
            Variant::Truncated(k) => Some(k),
            _ => None,
        }
    }

    fn minimizes(self) -> bool {
        matches!(self, Variant::Full | Variant::Truncated(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Integrator {
    Rk4,
    /// Backward-in-time implicit Euler with Newton iterations; for stiff data.
    ImplicitEuler,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub integrator: Integrator,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub warm_start: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::Rk4,
            inner_tol: crate::hamiltonians::DEFAULT_TOL,
            inner_max_iter: crate::hamiltonians::DEFAULT_MAX_ITER,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MinimizerStats {
    pub calls: u64,
    pub closed_form: u64,
    pub total_iterations: u64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionMeta {
    pub variant: Variant,
    pub grid: SolverGrid,
    pub integrator: Integrator,
    pub minimizer_stats: MinimizerStats,
    /// Largest |dP/dt| seen at the grid nodes.
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    grid: SolverGrid,
    /// `p1[i][n]`, regime-major.
    p1: Vec<Vec<f64>>,
    p2: Vec<Vec<f64>>,
    meta: SolutionMeta,
}

impl RiccatiSolution {
    pub fn grid(&self) -> &SolverGrid {
        &self.grid
    }

    pub fn meta(&self) -> &SolutionMeta {
        &self.meta
    }

    pub fn variant(&self) -> Variant {
        self.meta.variant
    }

    pub fn n_regimes(&self) -> usize {
        self.p1.len()
    }

    pub fn p1(&self, i: usize, n: usize) -> f64 {
        self.p1[i][n]
    }

    pub fn p2(&self, i: usize, n: usize) -> f64 {
        self.p2[i][n]
    }

    pub fn p1_series(&self, i: usize) -> &[f64] {
        &self.p1[i]
    }

    pub fn p2_series(&self, i: usize) -> &[f64] {
        &self.p2[i]
    }

    /// Linear interpolation of (P1ⁱ, P2ⁱ) at time `t`.
    pub fn at(&self, i: usize, t: f64) -> (f64, f64) {
        let n = self.grid.index_at(t);
        if n >= self.grid.steps {
            return (self.p1[i][n], self.p2[i][n]);
        }
        let w = ((t - self.grid.node(n)) / self.grid.step()).clamp(0.0, 1.0);
        let lerp = |s: &[f64]| s[n] + w * (s[n + 1] - s[n]);
        (lerp(&self.p1[i]), lerp(&self.p2[i]))
    }

    /// Predicted optimal cost `P1(0)(x⁺)² + P2(0)(x⁻)²` from regime `i0`.
    pub fn value(&self, x: f64, i0: usize) -> f64 {
        let xp = x.max(0.0);
        let xm = (-x).max(0.0);
        self.p1[i0][0] * xp * xp + self.p2[i0][0] * xm * xm
    }

    /// Sup-norm distance over all regimes, nodes and both components.
    pub fn sup_distance(&self, other: &RiccatiSolution) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b) in self.p1.iter().chain(&self.p2).zip(other.p1.iter().chain(&other.p2)) {
            for (x, y) in a.iter().zip(b) {
                d = d.max((x - y).abs());
            }
        }
        d
    }

    /// `max |P1 - P2|` over regimes and nodes.
    pub fn asymmetry(&self) -> f64 {
        self.p1
            .iter()
            .zip(&self.p2)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t,regime,P1,P2`, regimes 1-based, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,regime,P1,P2")?;
        for i in 0..self.n_regimes() {
            for n in 0..=self.grid.steps {
                writeln!(w, "{:.16e},{},{:.16e},{:.16e}", self.grid.node(n), i + 1, self.p1[i][n], self.p2[i][n])?;
            }
        }
        Ok(())
    }

    /// Writes `<stem>.csv` and `<stem>.meta.json` into `dir`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        std::fs::write(dir.join(format!("{stem}.meta.json")), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }
}

/// Per-regime argmins from the previous drift evaluation.
#[derive(Default)]
struct WarmCache {
    diffusion: Vec<[Option<DVector<f64>>; 2]>,
    jump: Vec<Vec<[Option<DVector<f64>>; 2]>>,
}

impl WarmCache {
    fn new(ell: usize, atoms: usize) -> Self {
        Self { diffusion: vec![[None, None]; ell], jump: vec![vec![[None, None]; atoms]; ell] }
    }
}

struct DriftEval<'a> {
    model: &'a RegimeModel,
    variant: Variant,
    opts: SolveOptions,
    cache: WarmCache,
    stats: MinimizerStats,
}

impl DriftEval<'_> {
    fn clamp_stage(&self, p: &mut [f64], component: u8, node: usize, t: f64) -> Result<()> {
        if !self.variant.minimizes() {
            return Ok(());
        }
        for (i, x) in p.iter_mut().enumerate() {
            if *x < -NEGATIVE_CLAMP {
                return Err(Error::NegativeP { component, value: *x, node, site: Site::new(i, t) });
            }
            *x = x.max(0.0);
        }
        Ok(())
    }

    fn infimum(
        &mut self,
        which: Which,
        i: usize,
        t: f64,
        atom: Option<usize>,
        pt: &RiccatiPoint,
    ) -> Result<f64> {
        let obj = Objective::build(which, self.model, i, t, atom, pt)?;
        let slot = match which {
            Which::H11 | Which::H12 => 0,
            Which::H21 | Which::H22 => 1,
        };
        let warm = if self.opts.warm_start {
            match atom {
                None => self.cache.diffusion[i][slot].as_ref(),
                Some(a) => self.cache.jump[i][a][slot].as_ref(),
            }
        } else {
            None
        };
        let cone = if which.is_jump() { self.model.pi2() } else { self.model.pi1() };
        let site = atom.map_or(Site::new(i, t), |a| Site::with_atom(i, t, a));
        let mo = MinimizeOptions {
            radius: self.variant.radius(),
            tol: self.opts.inner_tol,
            max_iter: self.opts.inner_max_iter,
            warm_start: warm,
        };
        let r = minimize_objective(&obj, cone, &mo, site)?;
        self.stats.calls += 1;
        if r.iterations == 0 {
            self.stats.closed_form += 1;
        }
        self.stats.total_iterations += r.iterations as u64;
        self.stats.max_iterations = self.stats.max_iterations.max(r.iterations);
        if self.opts.warm_start {
            match atom {
                None => self.cache.diffusion[i][slot] = Some(r.argmin),
                Some(a) => self.cache.jump[i][a][slot] = Some(r.argmin),
            }
        }
        Ok(r.value)
    }

    /// `f = -dP/dt` at stage values `(p1, p2)`; coefficients sampled at `t`.
    fn eval(&mut self, t: f64, p1: &[f64], p2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let model = self.model;
        let ell = model.n_regimes();
        let q = model.generator();
        let nu = model.nu();
        let mut f1 = vec![0.0; ell];
        let mut f2 = vec![0.0; ell];
        for i in 0..ell {
            let c = model.coefficients(i, t);
            let base = 2.0 * c.a + c.c.norm_squared();
            let coupling1: f64 = (0..ell).map(|j| q[(i, j)] * p1[j]).sum();
            let coupling2: f64 = (0..ell).map(|j| q[(i, j)] * p2[j]).sum();
            let pt = RiccatiPoint::for_model(model, p1[i], p2[i]);

            let (mut h1, mut h2) = (0.0, 0.0);
            let mut weight_q = c.q;
            match self.variant {
                Variant::Full | Variant::Truncated(_) => {
                    h1 += self.infimum(Which::H11, i, t, None, &pt)?;
                    h2 += self.infimum(Which::H21, i, t, None, &pt)?;
                    for (a, atom) in nu.atoms().iter().enumerate() {
                        h1 += atom.weight * self.infimum(Which::H12, i, t, Some(a), &pt)?;
                        h2 += atom.weight * self.infimum(Which::H22, i, t, Some(a), &pt)?;
                    }
                }
                Variant::UpperBound => {
                    for (a, atom) in nu.atoms().iter().enumerate() {
                        let j = model.jump_coefficients(i, t, a);
                        let zero = DVector::zeros(j.b2.len());
                        h1 += atom.weight * crate::hamiltonians::h12(j, &zero, &pt);
                        h2 += atom.weight * crate::hamiltonians::h22(j, &zero, &pt);
                    }
                }
                Variant::LowerBound => weight_q = 0.0,
            }
            f1[i] = base * p1[i] + weight_q + h1 + coupling1;
            f2[i] = base * p2[i] + weight_q + h2 + coupling2;
        }
        Ok((f1, f2))
    }
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Integrate the requested variant backward from `T` on `grid`.
pub fn solve(model: &RegimeModel, grid: &SolverGrid, variant: Variant) -> Result<RiccatiSolution> {
    solve_with(model, grid, variant, SolveOptions::default())
}

pub fn solve_with(
    model: &RegimeModel,
    grid: &SolverGrid,
    variant: Variant,
    opts: SolveOptions,
) -> Result<RiccatiSolution> {
    if (grid.horizon - model.horizon()).abs() > 1e-12 * model.horizon() {
        return Err(Error::Config(format!(
            "solver grid horizon {} differs from model horizon {}",
            grid.horizon,
            model.horizon()
        )));
    }
    if let Variant::Truncated(k) = variant {
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::Config(format!("truncation radius must be nonnegative, got {k}")));
        }
    }
    let ell = model.n_regimes();
    let n_steps = grid.steps;
    let h = grid.step();

    let terminal: Vec<f64> = match variant {
        Variant::LowerBound => vec![0.0; ell],
        _ => (0..ell).map(|i| model.terminal_weight(i)).collect(),
    };
    let mut p1 = vec![vec![0.0; n_steps + 1]; ell];
    let mut p2 = vec![vec![0.0; n_steps + 1]; ell];
    for i in 0..ell {
        p1[i][n_steps] = terminal[i];
        p2[i][n_steps] = terminal[i];
    }

    let mut ev = DriftEval {
        model,
        variant,
        opts,
        cache: WarmCache::new(ell, model.nu().len()),
        stats: MinimizerStats::default(),
    };
    let mut cur1 = terminal.clone();
    let mut cur2 = terminal;
    let mut max_drift: f64 = 0.0;

    for n in (0..n_steps).rev() {
        let t_hi = grid.node(n + 1);
        let t_lo = grid.node(n);
        // Coefficients are constant across the step; sampling the midpoint
        // puts a knot on a grid node exactly at that node.
        let t_coef = 0.5 * (t_lo + t_hi);

        let (next1, next2) = match opts.integrator {
            Integrator::Rk4 => {
                let (k1a, k1b) = ev.eval(t_coef, &cur1, &cur2)?;
                max_drift = k1a.iter().chain(&k1b).fold(max_drift, |m, x| m.max(x.abs()));
                let mut s1 = axpy(&cur1, 0.5 * h, &k1a);
                let mut s2 = axpy(&cur2, 0.5 * h, &k1b);
                ev.clamp_stage(&mut s1, 1, n, t_coef)?;
                ev.clamp_stage(&mut s2, 2, n, t_coef)?;
                let (k2a, k2b) = ev.eval(t_coef, &s1, &s2)?;
                let mut s1 = axpy(&cur1, 0.5 * h, &k2a);
                let mut s2 = axpy(&cur2, 0.5 * h, &k2b);
                ev.clamp_stage(&mut s1, 1, n, t_coef)?;
                ev.clamp_stage(&mut s2, 2, n, t_coef)?;
                let (k3a, k3b) = ev.eval(t_coef, &s1, &s2)?;
                let mut s1 = axpy(&cur1, h, &k3a);
                let mut s2 = axpy(&cur2, h, &k3b);
                ev.clamp_stage(&mut s1, 1, n, t_coef)?;
                ev.clamp_stage(&mut s2, 2, n, t_coef)?;
                let (k4a, k4b) = ev.eval(t_coef, &s1, &s2)?;
                let comb = |y: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
                    (0..y.len()).map(|i| y[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i])).collect()
                };
                (comb(&cur1, &k1a, &k2a, &k3a, &k4a), comb(&cur2, &k1b, &k2b, &k3b, &k4b))
            }
            Integrator::ImplicitEuler => implicit_euler_step(&mut ev, t_coef, h, &cur1, &cur2, &mut max_drift)?,
        };
        cur1 = next1;
        cur2 = next2;
        ev.clamp_stage(&mut cur1, 1, n, t_lo)?;
        ev.clamp_stage(&mut cur2, 2, n, t_lo)?;
        for i in 0..ell {
            p1[i][n] = cur1[i];
            p2[i][n] = cur2[i];
        }
        if variant.minimizes() {
            check_definiteness(model, 0..ell, t_lo, n, &cur1, &cur2)?;
        }
    }
    if variant.minimizes() {
        let t_end = grid.node(n_steps);
        let g1: Vec<f64> = (0..ell).map(|i| p1[i][n_steps]).collect();
        let g2: Vec<f64> = (0..ell).map(|i| p2[i][n_steps]).collect();
        check_definiteness(model, 0..ell, t_end, n_steps, &g1, &g2)?;
    }

    Ok(RiccatiSolution {
        grid: *grid,
        p1,
        p2,
        meta: SolutionMeta { variant, grid: *grid, integrator: opts.integrator, minimizer_stats: ev.stats, max_drift },
    })
}

/// `R1 + P D'D ≻ 0` for both components; skipped when Π1 = {0}.
fn check_definiteness(
    model: &RegimeModel,
    regimes: std::ops::Range<usize>,
    t: f64,
    node: usize,
    p1: &[f64],
    p2: &[f64],
) -> Result<()> {
    if model.pi1().is_zero() {
        return Ok(());
    }
    for i in regimes {
        let c = model.coefficients(i, t);
        let dtd = c.dtd();
        for p in [p1[i], p2[i]] {
            let m = &c.r1 + &dtd * p;
            let e = min_eigenvalue(&m);
            if e <= 1e-12 {
                return Err(Error::DefinitenessLost { node, min_eig: e, site: Site::new(i, t) });
            }
        }
    }
    Ok(())
}

/// Solve `P_n = P_{n+1} + h f(P_n)` by Newton's method with a
/// finite-difference Jacobian.
fn implicit_euler_step(
    ev: &mut DriftEval<'_>,
    t: f64,
    h: f64,
    cur1: &[f64],
    cur2: &[f64],
    max_drift: &mut f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ell = cur1.len();
    let dim = 2 * ell;
    let pack = |a: &[f64], b: &[f64]| DVector::from_iterator(dim, a.iter().chain(b).copied());
    let y_prev = pack(cur1, cur2);
    let mut y = y_prev.clone();
    let residual = |ev: &mut DriftEval<'_>, y: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
        let mut a: Vec<f64> = y.rows(0, ell).iter().copied().collect();
        let mut b: Vec<f64> = y.rows(ell, ell).iter().copied().collect();
        if ev.variant.minimizes() {
            a.iter_mut().chain(b.iter_mut()).for_each(|x| *x = x.max(0.0));
        }
        let (f1, f2) = ev.eval(t, &a, &b)?;
        let f = pack(&f1, &f2);
        Ok((y - &y_prev - &f * h, f))
    };
    for _ in 0..50 {
        let (r, f) = residual(ev, &y)?;
        *max_drift = f.iter().fold(*max_drift, |m, x| m.max(x.abs()));
        if r.amax() <= 1e-14 * (1.0 + y.amax()) {
            break;
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for c in 0..dim {
            let eps = 1e-7 * (1.0 + y[c].abs());
            let mut yp = y.clone();
            yp[c] += eps;
            let (rp, _) = residual(ev, &yp)?;
            jac.set_column(c, &((rp - &r) / eps));
        }
        let delta = jac.lu().solve(&r).ok_or_else(|| Error::Config("singular Newton system in implicit Euler step".into()))?;
        y -= delta;
    }
    Ok((y.rows(0, ell).iter().copied().collect(), y.rows(ell, ell).iter().copied().collect()))
}

/// Integrates the system with the infima replaced by the Hamiltonians at `v = 0`.
pub fn solve_upper_bound(model: &RegimeModel, grid: &SolverGrid) -> Result<RiccatiSolution> {
    solve(model, grid, Variant::UpperBound)
}

/// Explicit uniformly positive lower bound of the singular cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularLowerBound {
    pub case: SingularCase,
    pub delta: f64,
    /// Growth constant (c2 for cases I and III, c3 for case II).
    pub constant: f64,
    pub horizon: f64,
}

impl SingularLowerBound {
    pub fn new(case: SingularCase, delta: f64, constant: f64, horizon: f64) -> Self {
        Self { case, delta, constant, horizon }
    }

    pub fn at(&self, t: f64) -> f64 {
        let tau = self.horizon - t;
        match self.case {
            SingularCase::II => self.delta * (-self.constant * tau).exp(),
            SingularCase::I | SingularCase::III => {
                1.0 / ((1.0 / self.delta + 1.0) * (self.constant * tau).exp() - 1.0)
            }
        }
    }
}

/// Lower-bound curve for the declared singular case, with its constant taken
/// as the worst case over regimes, coefficient pieces and atoms.
///
/// * Case I: `c ≥ -(2A+|C|² - |B1+D'C|²/δ)` and `c ≥ Σ_z ν(z)|B2|²/δ`.
/// * Case II: `c ≥ -(2A+|C|² - |B1+D'C|²/δ - Σ_z ν(z)|F'E+B2|²/δ)`.
/// * Case III: `c ≥ -(2A+|C|² - Σ_z ν(z)|F'E+B2|²/δ)` and `c ≥ |B1+D'C|²/δ`.
pub fn lower_bound_singular(flags: &CaseFlags, model: &RegimeModel) -> Result<SingularLowerBound> {
    let case = flags.singular_case.ok_or(Error::NotSingular)?;
    let delta = flags.delta;
    let nu = model.nu();
    let mut c: f64 = 0.0;
    for r in model.regimes() {
        for piece in r.pieces() {
            let d = &piece.diffusion;
            let base = 2.0 * d.a + d.c.norm_squared();
            let b1 = d.b1_eff().norm_squared() / delta;
            let jump_b2: f64 = nu.atoms().iter().zip(&piece.jumps).map(|(a, j)| a.weight * j.b2.norm_squared()).sum::<f64>() / delta;
            let jump_fe: f64 = nu
                .atoms()
                .iter()
                .zip(&piece.jumps)
                .map(|(a, j)| a.weight * (j.f.transpose() * &j.e + &j.b2).norm_squared())
                .sum::<f64>()
                / delta;
            match case {
                SingularCase::I => {
                    c = c.max(-(base - b1)).max(jump_b2);
                }
                SingularCase::II => {
                    c = c.max(-(base - b1 - jump_fe));
                }
                SingularCase::III => {
                    c = c.max(-(base - jump_fe)).max(b1);
                }
            }
        }
    }
    Ok(SingularLowerBound::new(case, delta, c, model.horizon()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_and_lookup() {
        let g = SolverGrid::new(1.0, 10).unwrap();
        assert_eq!(g.node(10), 1.0);
        assert_eq!(g.index_at(0.3), 3);
        assert_eq!(g.index_at(0.35), 3);
        assert_eq!(g.index_at(1.0), 10);
        assert_eq!(g.index_at(2.0), 10);
        assert!(SolverGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let lb = SingularLowerBound::new(SingularCase::II, 1.0, 2.0, 1.0);
        assert!((lb.at(0.0) - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(lb.at(1.0), 1.0);
        let lb = SingularLowerBound::new(SingularCase::I, 1.0, 0.0, 5.0);
        assert_eq!(lb.at(0.3), 1.0);
        let lb = SingularLowerBound::new(SingularCase::I, 0.5, 0.7, 2.0);
        assert!((lb.at(2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_requires_singular_flags() {
        let m = crate::model::config::ModelConfig::from_json(
            r#"{"schema":1,"horizon":1.0,"dims":{"n1":1,"n2":1,"m1":1,"m2":1},"generator":[[0.0]],
                "cones":{"pi1":{"kind":"full_space"},"pi2":{"kind":"full_space"}},
                "regimes":[{"R1":[[1.0]],"G":1.0}]}"#,
        )
        .unwrap()
        .into_model()
        .unwrap();
        assert!(matches!(lower_bound_singular(&CaseFlags::standard(1.0), &m), Err(Error::NotSingular)));
    }
}
