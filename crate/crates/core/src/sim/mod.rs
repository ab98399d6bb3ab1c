//! Forward simulation of the controlled state and Monte Carlo cost estimates.
//!
//! The continuous part is stepped with Euler–Maruyama on a uniform grid
//! refined by every exogenous event: regime switches, Poisson arrivals and
//! coefficient knots. Jumps are applied exactly at their arrival times. All
//! event times are independent of the control, so two controls simulated
//! with the same seed see the same noise.

mod chain;
mod estimate;
pub mod rng;
mod verify;

use std::io::Write;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

pub use chain::{simulate_chain, RegimePath};
pub use estimate::{effective_workers, estimate_cost, pairwise_sum, McEstimate, SimConfig, THREADS_ENV};
pub use verify::{verify, AdversaryResult, VerificationReport, VerifyConfig};

use crate::error::{Error, Result};
use crate::feedback::FeedbackLaw;
use crate::model::{Piece, RegimeModel};
use rng::{path_rng, Stream};

/// Paths are abandoned once `|X|` exceeds this.
pub const EXPLOSION_LEVEL: f64 = 1e12;

/// Control evaluated at left limits: `(t, X(t-), α(t-))`.
pub trait ControlPolicy: Sync {
    fn control(&self, t: f64, x: f64, regime: usize, u1: &mut DVector<f64>, u2: &mut [DVector<f64>]);
}

impl ControlPolicy for FeedbackLaw {
    fn control(&self, t: f64, x: f64, regime: usize, u1: &mut DVector<f64>, u2: &mut [DVector<f64>]) {
        let n = self.grid().index_at(t.clamp(0.0, self.grid().horizon));
        self.control_into(n, x, regime, u1, u2);
    }
}

/// Admissible controls used by `verify`; all stay in the cones by scaling.
#[derive(Debug, Clone, Copy)]
pub enum Control<'a> {
    Feedback(&'a FeedbackLaw),
    /// `(1 + ε) u*`
    Scaled(&'a FeedbackLaw, f64),
    Zero,
    /// `u1 = v X⁺`, `u2 = 0`
    Ray(&'a DVector<f64>),
}

impl ControlPolicy for Control<'_> {
    fn control(&self, t: f64, x: f64, regime: usize, u1: &mut DVector<f64>, u2: &mut [DVector<f64>]) {
        match *self {
            Control::Feedback(law) => law.control(t, x, regime, u1, u2),
            Control::Scaled(law, s) => {
                law.control(t, x, regime, u1, u2);
                *u1 *= s;
                u2.iter_mut().for_each(|u| *u *= s);
            }
            Control::Zero => {
                u1.fill(0.0);
                u2.iter_mut().for_each(|u| u.fill(0.0));
            }
            Control::Ray(v) => {
                u1.copy_from(v);
                *u1 *= x.max(0.0);
                u2.iter_mut().for_each(|u| u.fill(0.0));
            }
        }
    }
}

/// Arbitrary closure `(t, x, regime, u1, u2)` as a control.
pub struct FnControl<F>(pub F);

impl<F> ControlPolicy for FnControl<F>
where
    F: Fn(f64, f64, usize, &mut DVector<f64>, &mut [DVector<f64>]) + Sync,
{
    fn control(&self, t: f64, x: f64, regime: usize, u1: &mut DVector<f64>, u2: &mut [DVector<f64>]) {
        (self.0)(t, x, regime, u1, u2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceEvent {
    None,
    /// Jump of component `component` with mark `atom` (both 0-based).
    Jump { component: usize, atom: usize },
    Switch { to: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// Value after any event at `t`.
    pub x: f64,
    pub regime: usize,
    pub u1: Vec<f64>,
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub path_id: u64,
    pub cost: f64,
    pub x_terminal: f64,
    pub regimes: RegimePath,
    pub n_jumps: usize,
    pub trace: Option<Vec<TraceRow>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct JumpEvent {
    t: f64,
    component: usize,
    atom: usize,
}

/// Reusable buffers for one worker.
pub(crate) struct Workspace {
    u1: DVector<f64>,
    u2: Vec<DVector<f64>>,
    chain: RegimePath,
    jumps: Vec<JumpEvent>,
    breaks: Vec<f64>,
    n1: usize,
}

impl Workspace {
    pub(crate) fn new(model: &RegimeModel) -> Self {
        let d = model.dims();
        Self {
            u1: DVector::zeros(d.m1),
            u2: vec![DVector::zeros(d.m2); model.nu().len()],
            chain: RegimePath::default(),
            jumps: Vec::new(),
            breaks: Vec::new(),
            n1: d.n1,
        }
    }
}

/// Sorted distinct coefficient knots strictly inside `(0, T)`.
pub(crate) fn coefficient_knots(model: &RegimeModel) -> Vec<f64> {
    let mut k: Vec<f64> = model
        .regimes()
        .iter()
        .flat_map(|r| r.knots().iter().copied())
        .filter(|&t| t > 0.0 && t < model.horizon())
        .collect();
    k.sort_by(f64::total_cmp);
    k.dedup();
    k
}

fn quad_form(m: &nalgebra::DMatrix<f64>, u: &DVector<f64>) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    for c in 0..n {
        let uc = u[c];
        if uc == 0.0 {
            continue;
        }
        for r in 0..n {
            acc += u[r] * m[(r, c)] * uc;
        }
    }
    acc
}

/// Running cost `u1'R1u1 + QX² + Σ_z ν(z) u2(z)'R2u2(z)` on `piece`.
fn running_cost(model: &RegimeModel, piece: &Piece, x: f64, u1: &DVector<f64>, u2: &[DVector<f64>]) -> f64 {
    let c = &piece.diffusion;
    let mut l = quad_form(&c.r1, u1) + c.q * x * x;
    for ((a, j), u) in model.nu().atoms().iter().zip(&piece.jumps).zip(u2) {
        if a.weight != 0.0 {
            l += a.weight * quad_form(&j.r2, u);
        }
    }
    l
}

/// Simulates one path; `path_id` selects the random streams.
pub fn simulate_path(
    model: &RegimeModel,
    policy: &dyn ControlPolicy,
    x0: f64,
    i0: usize,
    grid_sim: usize,
    seed: u64,
    path_id: u64,
    trace: bool,
) -> Result<PathRecord> {
    if i0 >= model.n_regimes() {
        return Err(Error::Config(format!("initial regime {} out of range 1..={}", i0 + 1, model.n_regimes())));
    }
    if grid_sim == 0 {
        return Err(Error::Config("simulation grid needs at least one step".into()));
    }
    let knots = coefficient_knots(model);
    let mut ws = Workspace::new(model);
    let mut rows = trace.then(Vec::new);
    let (cost, x_t) = run_path(model, policy, x0, i0, grid_sim, seed, path_id, &knots, &mut ws, rows.as_mut())?;
    Ok(PathRecord {
        path_id,
        cost,
        x_terminal: x_t,
        regimes: ws.chain.clone(),
        n_jumps: ws.jumps.len(),
        trace: rows,
    })
}

/// Core path loop; returns `(realized cost, X_T)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_path(
    model: &RegimeModel,
    policy: &dyn ControlPolicy,
    x0: f64,
    i0: usize,
    grid_sim: usize,
    seed: u64,
    path_id: u64,
    knots: &[f64],
    ws: &mut Workspace,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<(f64, f64)> {
    let horizon = model.horizon();
    let nu = model.nu();
    let n2 = model.dims().n2;

    let mut chain_rng = path_rng(seed, Stream::Chain, path_id);
    chain::simulate_chain_into(model.generator(), i0, horizon, &mut chain_rng, &mut ws.chain);

    ws.jumps.clear();
    let rate = nu.total_mass();
    if rate > 0.0 {
        let mut jump_rng = path_rng(seed, Stream::Jumps, path_id);
        for component in 0..n2 {
            let mut t = 0.0;
            loop {
                let e: f64 = jump_rng.sample(Exp1);
                t += e / rate;
                if t >= horizon {
                    break;
                }
                let mut u = jump_rng.random::<f64>() * rate;
                let mut atom = 0;
                for (a, at) in nu.atoms().iter().enumerate() {
                    if at.weight > 0.0 {
                        atom = a;
                        if u < at.weight {
                            break;
                        }
                        u -= at.weight;
                    }
                }
                ws.jumps.push(JumpEvent { t, component, atom });
            }
        }
        ws.jumps.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.component.cmp(&b.component)));
    }

    // Breakpoints: uniform nodes, knots, switches, jumps.
    ws.breaks.clear();
    let h = horizon / grid_sim as f64;
    ws.breaks.extend((1..grid_sim).map(|n| n as f64 * h));
    ws.breaks.push(horizon);
    ws.breaks.extend_from_slice(knots);
    ws.breaks.extend(ws.chain.epochs.iter().skip(1).copied());
    ws.breaks.extend(ws.jumps.iter().map(|j| j.t));
    ws.breaks.sort_by(f64::total_cmp);
    ws.breaks.dedup();

    let mut bm_rng = path_rng(seed, Stream::Brownian, path_id);
    let mut x = x0;
    let mut s = 0.0;
    let mut regime = i0;
    let mut next_switch = 1;
    let mut next_jump = 0;
    let mut cost = 0.0;

    let Workspace { u1, u2, chain, jumps, breaks, n1 } = ws;
    let n1 = *n1;

    if let Some(tr) = trace.as_deref_mut() {
        policy.control(0.0, x, regime, u1, u2);
        tr.push(TraceRow { t: 0.0, x, regime, u1: u1.iter().copied().collect(), event: TraceEvent::None });
    }

    for (step, &t_next) in breaks.iter().enumerate() {
        let dt = t_next - s;
        if dt > 0.0 {
            let piece = model.piece(regime, s);
            let c = &piece.diffusion;
            policy.control(s, x, regime, u1, u2);
            let l_left = running_cost(model, piece, x, u1, u2);

            let mut drift = c.a * x + c.b1.dot(u1);
            for ((atom, j), u) in nu.atoms().iter().zip(&piece.jumps).zip(u2.iter()) {
                if atom.weight == 0.0 {
                    continue;
                }
                // ∫B2'u2 ν minus the compensator of Σ_k (E_k X + F_k u2) Ñ_k.
                let mut comp = 0.0;
                for k in 0..n2 {
                    comp += j.e[k] * x;
                    for l in 0..u.len() {
                        comp += j.f[(k, l)] * u[l];
                    }
                }
                drift += atom.weight * (j.b2.dot(u) - comp);
            }
            let sq = dt.sqrt();
            let mut diffusion = 0.0;
            for r in 0..n1 {
                let z: f64 = bm_rng.sample(StandardNormal);
                let mut vol = c.c[r] * x;
                for k in 0..u1.len() {
                    vol += c.d[(r, k)] * u1[k];
                }
                diffusion += vol * z * sq;
            }
            x += drift * dt + diffusion;

            policy.control(t_next, x, regime, u1, u2);
            let l_right = running_cost(model, piece, x, u1, u2);
            cost += 0.5 * (l_left + l_right) * dt;
        }

        // Jumps use the left limits X(τ-), α(τ-).
        let mut event = TraceEvent::None;
        while next_jump < jumps.len() && jumps[next_jump].t <= t_next {
            let ev = jumps[next_jump];
            let j = model.jump_coefficients(regime, ev.t, ev.atom);
            policy.control(ev.t, x, regime, u1, u2);
            let u = &u2[ev.atom];
            let fu: f64 = (0..u.len()).map(|l| j.f[(ev.component, l)] * u[l]).sum();
            x += j.e[ev.component] * x + fu;
            event = TraceEvent::Jump { component: ev.component, atom: ev.atom };
            next_jump += 1;
        }
        while next_switch < chain.epochs.len() && chain.epochs[next_switch] <= t_next {
            regime = chain.states[next_switch];
            event = TraceEvent::Switch { to: regime };
            next_switch += 1;
        }
        s = t_next;

        if !x.is_finite() || x.abs() > EXPLOSION_LEVEL {
            return Err(Error::ExplodedPath { path_id, step, t: s, value: x });
        }
        if let Some(tr) = trace.as_deref_mut() {
            policy.control(s, x, regime, u1, u2);
            tr.push(TraceRow { t: s, x, regime, u1: u1.iter().copied().collect(), event });
        }
    }

    let g = model.terminal_weight(regime);
    Ok((cost + g * x * x, x))
}

/// CSV `t,x,regime,u1_1..u1_m,event` with the regime 1-based.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut w: W) -> Result<()> {
    let m1 = rows.first().map_or(0, |r| r.u1.len());
    write!(w, "t,x,regime")?;
    for k in 1..=m1 {
        write!(w, ",u1_{k}")?;
    }
    writeln!(w, ",event")?;
    for r in rows {
        write!(w, "{:.16e},{:.16e},{}", r.t, r.x, r.regime + 1)?;
        for u in &r.u1 {
            write!(w, ",{u:.16e}")?;
        }
        match r.event {
            TraceEvent::None => writeln!(w, ",")?,
            TraceEvent::Jump { component, atom } => writeln!(w, ",jump:{}:{}", component + 1, atom + 1)?,
            TraceEvent::Switch { to } => writeln!(w, ",switch:{}", to + 1)?,
        }
    }
    Ok(())
}
