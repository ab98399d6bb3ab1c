//! The four Hamiltonians of the coupled Riccati system and their infima over
//! the control cones.
//!
//! `H11`/`H21` are quadratics in the diffusion control `v ∈ Π1`. `H12`/`H22`
//! act on the jump control `v ∈ Π2` and add, per jump component `k`, squared
//! hinges of the post-jump factor `1 + E_k + F_k v`, weighted by `P1` on its
//! positive part and `P2` on its negative part. Both families are convex when
//! the weights are nonnegative, and squared hinges are C¹, so projected
//! gradient descent applies directly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result, Site};
use crate::model::{Coefficients, ConeSpec, JumpCoefficients, RegimeModel};

/// Weights `P + Γ` down to this much below zero are roundoff and clamped to 0.
pub const WEIGHT_CLAMP: f64 = 1e-10;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

#[inline]
fn neg(x: f64) -> f64 {
    (-x).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Which {
    H11,
    H12,
    H21,
    H22,
}

impl Which {
    pub fn code(self) -> u8 {
        match self {
            Which::H11 => 11,
            Which::H12 => 12,
            Which::H21 => 21,
            Which::H22 => 22,
        }
    }

    pub fn is_jump(self) -> bool {
        matches!(self, Which::H12 | Which::H22)
    }
}

/// Values of the Riccati unknowns at one (regime, time).
///
/// The martingale parts `Λ` and `Γ` are zero for time-deterministic
/// coefficients; the slots are kept so every formula has its full shape.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiPoint {
    pub p1: f64,
    pub p2: f64,
    pub lambda1: DVector<f64>,
    pub lambda2: DVector<f64>,
    pub gamma1: DVector<f64>,
    pub gamma2: DVector<f64>,
}

impl RiccatiPoint {
    pub fn new(p1: f64, p2: f64, n1: usize, n2: usize) -> Self {
        Self {
            p1,
            p2,
            lambda1: DVector::zeros(n1),
            lambda2: DVector::zeros(n1),
            gamma1: DVector::zeros(n2),
            gamma2: DVector::zeros(n2),
        }
    }

    pub fn for_model(model: &RegimeModel, p1: f64, p2: f64) -> Self {
        let d = model.dims();
        Self::new(p1, p2, d.n1, d.n2)
    }

    /// Same point with the roles of (P1, Γ1) and (P2, Γ2) exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            p1: self.p2,
            p2: self.p1,
            lambda1: self.lambda2.clone(),
            lambda2: self.lambda1.clone(),
            gamma1: self.gamma2.clone(),
            gamma2: self.gamma1.clone(),
        }
    }
}

pub fn h11(c: &Coefficients, v: &DVector<f64>, pt: &RiccatiPoint) -> f64 {
    let m = &c.r1 + c.dtd() * pt.p1;
    let lin = c.b1_eff() * pt.p1 + c.d.transpose() * &pt.lambda1;
    (v.transpose() * m * v)[0] + 2.0 * lin.dot(v)
}

/// The linear term carries `B1`, mirroring `h11` with the sign flipped.
pub fn h21(c: &Coefficients, v: &DVector<f64>, pt: &RiccatiPoint) -> f64 {
    let m = &c.r1 + c.dtd() * pt.p2;
    let lin = c.b1_eff() * pt.p2 + c.d.transpose() * &pt.lambda2;
    (v.transpose() * m * v)[0] - 2.0 * lin.dot(v)
}

pub fn h12(j: &JumpCoefficients, v: &DVector<f64>, pt: &RiccatiPoint) -> f64 {
    let mut val = (v.transpose() * &j.r2 * v)[0];
    let mut jump_sum = 0.0;
    for k in 0..j.e.len() {
        let fv = j.f.row(k).dot(&v.transpose());
        let x = 1.0 + j.e[k] + fv;
        val += (pt.p1 + pt.gamma1[k]) * (pos(x).powi(2) - 1.0);
        val += (pt.p2 + pt.gamma2[k]) * neg(x).powi(2);
        jump_sum += j.e[k] + fv;
    }
    val - 2.0 * pt.p1 * jump_sum + 2.0 * pt.p1 * j.b2.dot(v)
}

pub fn h22(j: &JumpCoefficients, v: &DVector<f64>, pt: &RiccatiPoint) -> f64 {
    let mut val = (v.transpose() * &j.r2 * v)[0];
    let mut jump_sum = 0.0;
    for k in 0..j.e.len() {
        let fv = j.f.row(k).dot(&v.transpose());
        let x = -1.0 - j.e[k] + fv;
        val += (pt.p2 + pt.gamma2[k]) * (neg(x).powi(2) - 1.0);
        val += (pt.p1 + pt.gamma1[k]) * pos(x).powi(2);
        jump_sum += j.e[k] - fv;
    }
    val - 2.0 * pt.p2 * jump_sum - 2.0 * pt.p2 * j.b2.dot(v)
}

pub fn eval_h11(model: &RegimeModel, i: usize, t: f64, v: &DVector<f64>, pt: &RiccatiPoint) -> f64 {
    h11(model.coefficients(i, t), v, pt)
}

pub fn eval_h21(model: &RegimeModel, i: usize, t: f64, v: &DVector<f64>, pt: &RiccatiPoint) -> f64 {
    h21(model.coefficients(i, t), v, pt)
}

pub fn eval_h12(model: &RegimeModel, i: usize, t: f64, atom: usize, v: &DVector<f64>, pt: &RiccatiPoint) -> f64 {
    h12(model.jump_coefficients(i, t, atom), v, pt)
}

pub fn eval_h22(model: &RegimeModel, i: usize, t: f64, atom: usize, v: &DVector<f64>, pt: &RiccatiPoint) -> f64 {
    h22(model.jump_coefficients(i, t, atom), v, pt)
}

#[derive(Debug, Clone, PartialEq)]
struct Hinge {
    row: DVector<f64>,
    shift: f64,
    w_pos: f64,
    w_neg: f64,
}

/// `vᵀMv + gᵀv + c + Σ_k [w⁺_k ((s_k + f_kᵀv)⁺)² + w⁻_k ((s_k + f_kᵀv)⁻)²]`
///
/// Common convex form of all four Hamiltonians.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    which: Which,
    quad: DMatrix<f64>,
    lin: DVector<f64>,
    constant: f64,
    hinges: Vec<Hinge>,
}

fn clamp_weight(w: f64, site: Site) -> Result<f64> {
    if w >= 0.0 {
        Ok(w)
    } else if w >= -WEIGHT_CLAMP {
        Ok(0.0)
    } else {
        Err(Error::NegativeHamiltonianWeight { value: w, site })
    }
}

impl Objective {
    pub fn diffusion(which: Which, c: &Coefficients, pt: &RiccatiPoint, site: Site) -> Result<Self> {
        let (p, lambda, sign) = match which {
            Which::H11 => (pt.p1, &pt.lambda1, 1.0),
            Which::H21 => (pt.p2, &pt.lambda2, -1.0),
            _ => unreachable!("diffusion objective built for a jump Hamiltonian"),
        };
        let p = clamp_weight(p, site)?;
        let quad = &c.r1 + c.dtd() * p;
        let lin = (c.b1_eff() * p + c.d.transpose() * lambda) * (2.0 * sign);
        Ok(Self { which, quad, lin, constant: 0.0, hinges: Vec::new() })
    }

    pub fn jump(which: Which, j: &JumpCoefficients, pt: &RiccatiPoint, site: Site) -> Result<Self> {
        let n2 = j.e.len();
        let mut hinges = Vec::with_capacity(n2);
        let mut lin = DVector::zeros(j.b2.len());
        let mut constant = 0.0;
        for k in 0..n2 {
            let row = j.f.row(k).transpose();
            let w1 = clamp_weight(pt.p1 + pt.gamma1[k], site)?;
            let w2 = clamp_weight(pt.p2 + pt.gamma2[k], site)?;
            match which {
                Which::H12 => {
                    hinges.push(Hinge { row: row.clone(), shift: 1.0 + j.e[k], w_pos: w1, w_neg: w2 });
                    lin -= &row * (2.0 * pt.p1);
                    constant -= w1 + 2.0 * pt.p1 * j.e[k];
                }
                Which::H22 => {
                    hinges.push(Hinge { row: row.clone(), shift: -1.0 - j.e[k], w_pos: w1, w_neg: w2 });
                    lin += &row * (2.0 * pt.p2);
                    constant -= w2 + 2.0 * pt.p2 * j.e[k];
                }
                _ => unreachable!("jump objective built for a diffusion Hamiltonian"),
            }
        }
        match which {
            Which::H12 => lin += &j.b2 * (2.0 * pt.p1),
            _ => lin -= &j.b2 * (2.0 * pt.p2),
        }
        Ok(Self { which, quad: j.r2.clone(), lin, constant, hinges })
    }

    /// Objective for `which` at regime `i`, time `t` (and `atom` for jump terms).
    pub fn build(
        which: Which,
        model: &RegimeModel,
        i: usize,
        t: f64,
        atom: Option<usize>,
        pt: &RiccatiPoint,
    ) -> Result<Self> {
        if which.is_jump() {
            let a = atom.ok_or_else(|| Error::Config(format!("H{} needs a jump atom", which.code())))?;
            Self::jump(which, model.jump_coefficients(i, t, a), pt, Site::with_atom(i, t, a))
        } else {
            Self::diffusion(which, model.coefficients(i, t), pt, Site::new(i, t))
        }
    }

    pub fn which(&self) -> Which {
        self.which
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    pub fn value(&self, v: &DVector<f64>) -> f64 {
        let mut val = (v.transpose() * &self.quad * v)[0] + self.lin.dot(v) + self.constant;
        for h in &self.hinges {
            let x = h.shift + h.row.dot(v);
            val += h.w_pos * pos(x).powi(2) + h.w_neg * neg(x).powi(2);
        }
        val
    }

    pub fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut g = &self.quad * v * 2.0 + &self.lin;
        for h in &self.hinges {
            let x = h.shift + h.row.dot(v);
            let s = 2.0 * (h.w_pos * pos(x) - h.w_neg * neg(x));
            if s != 0.0 {
                g.axpy(s, &h.row, 1.0);
            }
        }
        g
    }

    /// Smallest |s_k + f_kᵀv| over the hinges; the objective is C² away from 0.
    pub fn kink_distance(&self, v: &DVector<f64>) -> f64 {
        self.hinges
            .iter()
            .map(|h| (h.shift + h.row.dot(v)).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Upper bound on the Lipschitz constant of the gradient.
    pub fn lipschitz(&self) -> f64 {
        let sym = (&self.quad + self.quad.transpose()) * 0.5;
        let lmax = if sym.nrows() == 0 { 0.0 } else { sym.symmetric_eigenvalues().max().max(0.0) };
        let hinge: f64 = self.hinges.iter().map(|h| 2.0 * h.w_pos.max(h.w_neg) * h.row.norm_squared()).sum();
        2.0 * lmax + hinge
    }

    /// Hessian of the quadratic piece active at `v` (average of both sides on a kink).
    pub fn hessian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut h = &self.quad + self.quad.transpose();
        for hg in &self.hinges {
            let x = hg.shift + hg.row.dot(v);
            let w = if x > 0.0 {
                hg.w_pos
            } else if x < 0.0 {
                hg.w_neg
            } else {
                0.5 * (hg.w_pos + hg.w_neg)
            };
            if w != 0.0 {
                h += &hg.row * hg.row.transpose() * (2.0 * w);
            }
        }
        h
    }

    fn is_quadratic(&self) -> bool {
        self.hinges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianResult {
    pub value: f64,
    pub argmin: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct MinimizeOptions<'a> {
    /// Feasible set is `Π ∩ {|v| ≤ k}` when set.
    pub radius: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point, projected onto the feasible set; the origin otherwise.
    pub warm_start: Option<&'a DVector<f64>>,
}

impl Default for MinimizeOptions<'_> {
    fn default() -> Self {
        Self { radius: None, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, warm_start: None }
    }
}

/// Infimum and argmin of `which` over its cone (optionally truncated to `|v| ≤ radius`).
pub fn minimize(
    which: Which,
    model: &RegimeModel,
    i: usize,
    t: f64,
    atom: Option<usize>,
    pt: &RiccatiPoint,
    radius: Option<f64>,
) -> Result<HamiltonianResult> {
    let obj = Objective::build(which, model, i, t, atom, pt)?;
    let cone = if which.is_jump() { model.pi2() } else { model.pi1() };
    let site = match atom {
        Some(a) => Site::with_atom(i, t, a),
        None => Site::new(i, t),
    };
    minimize_objective(&obj, cone, &MinimizeOptions { radius, ..Default::default() }, site)
}

pub fn minimize_objective(
    obj: &Objective,
    cone: &ConeSpec,
    opts: &MinimizeOptions<'_>,
    site: Site,
) -> Result<HamiltonianResult> {
    let m = obj.dim();
    if cone.dim() != m {
        return Err(Error::DimensionMismatch { what: "objective vs cone".into(), expected: cone.dim(), got: m });
    }
    if cone.is_zero() || opts.radius == Some(0.0) {
        let v = DVector::zeros(m);
        return Ok(HamiltonianResult { value: obj.value(&v), argmin: v, iterations: 0, converged: true });
    }

    if obj.is_quadratic() && cone.is_full_space() {
        if let Some(v) = solve_unconstrained(obj) {
            if opts.radius.is_none_or(|k| v.norm() <= k) {
                return Ok(HamiltonianResult { value: obj.value(&v), argmin: v, iterations: 0, converged: true });
            }
        }
    }

    projected_gradient(obj, cone, opts, site)
}

/// Vertex `-M⁻¹g/2` of a strictly convex quadratic; `None` when `M` is
/// singular at tolerance 1e-12.
fn solve_unconstrained(obj: &Objective) -> Option<DVector<f64>> {
    let sym = (&obj.quad + obj.quad.transpose()) * 0.5;
    if sym.clone().symmetric_eigenvalues().min() <= 1e-12 {
        return None;
    }
    let chol = sym.cholesky()?;
    Some(chol.solve(&obj.lin) * -0.5)
}

/// Newton step for the active quadratic piece restricted to the cone face
/// holding `v`; returned only when it improves on `v`.
fn face_newton(obj: &Objective, cone: &ConeSpec, radius: Option<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
    let z = cone.face_basis(v)?;
    let g = obj.gradient(v);
    let hz = z.transpose() * obj.hessian(v) * &z;
    let gz = z.transpose() * &g;
    let dir = &z * hz.cholesky()?.solve(&gz) * -1.0;
    let fv = obj.value(v);
    let floor = 1e-14 * (1.0 + fv.abs());
    let map_norm = |x: &DVector<f64>| {
        let mut t = x - obj.gradient(x) / obj.lipschitz().max(1e-12);
        cone.project_truncated_in_place(&mut t, radius);
        (t - x).norm()
    };
    let rv = map_norm(v);
    let mut alpha = 1.0;
    for _ in 0..30 {
        let mut c = v + &dir * alpha;
        cone.project_truncated_in_place(&mut c, radius);
        let fc = obj.value(&c);
        if fc < fv - floor || (fc <= fv + floor && map_norm(&c) < rv) {
            return Some(c);
        }
        alpha *= 0.5;
    }
    None
}

fn projected_gradient(
    obj: &Objective,
    cone: &ConeSpec,
    opts: &MinimizeOptions<'_>,
    site: Site,
) -> Result<HamiltonianResult> {
    let m = obj.dim();
    let lip = obj.lipschitz().max(1e-12);
    let mut v = match opts.warm_start {
        Some(w) if w.len() == m => w.clone(),
        _ => DVector::zeros(m),
    };
    cone.project_truncated_in_place(&mut v, opts.radius);
    let mut residual = f64::INFINITY;

    // Gradient mapping at the fixed step 1/L: its norm is the stopping
    // measure and, since L bounds the curvature, the mapped point never
    // increases the objective.
    let mapped = |v: &DVector<f64>| -> (DVector<f64>, f64) {
        let mut t = v - obj.gradient(v) / lip;
        cone.project_truncated_in_place(&mut t, opts.radius);
        let r = (&t - v).norm();
        (t, r)
    };

    for iter in 0..opts.max_iter {
        let (next, r) = mapped(&v);
        residual = r;
        if residual <= opts.tol {
            return Ok(HamiltonianResult { value: obj.value(&v), argmin: v, iterations: iter, converged: true });
        }
        v = next;
        if let Some(c) = face_newton(obj, cone, opts.radius, &v) {
            v = c;
        }
    }

    Err(Error::NoConvergence { which: obj.which().code(), iterations: opts.max_iter, residual, site })
}
