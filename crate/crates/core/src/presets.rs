//! Small built-in scalar models used by `selfcheck`, the tests and the docs.

use nalgebra::DMatrix;

use crate::model::{
    Atom, CaseFlags, Coefficients, ConeSpec, Dims, JumpCoefficients, JumpMeasure, Piece, Regime, RegimeModel,
    SingularCase,
};
use crate::Result;

/// Scalar coefficients of one regime; jump coefficients are shared by all atoms.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScalarRegime {
    pub a: f64,
    pub b1: f64,
    pub c: f64,
    pub d: f64,
    pub r1: f64,
    pub q: f64,
    pub g: f64,
    pub b2: f64,
    pub e: f64,
    pub f: f64,
    pub r2: f64,
}

/// Model with n1 = n2 = m1 = m2 = 1, one atom per entry of `atom_weights`.
pub fn scalar_model(
    horizon: f64,
    generator: &[&[f64]],
    atom_weights: &[f64],
    regimes: &[ScalarRegime],
    pi1: ConeSpec,
    pi2: ConeSpec,
) -> Result<RegimeModel> {
    let ell = generator.len();
    let q = DMatrix::from_fn(ell, ell, |i, j| generator[i].get(j).copied().unwrap_or(f64::NAN));
    let nu = JumpMeasure::new(
        atom_weights.iter().enumerate().map(|(k, &w)| Atom { mark: vec![k as f64], weight: w }).collect(),
    )?;
    let regimes = regimes
        .iter()
        .map(|r| {
            let piece = Piece {
                diffusion: Coefficients::scalar(r.a, r.b1, r.c, r.d, r.r1, r.q),
                jumps: vec![JumpCoefficients::scalar(r.b2, r.e, r.f, r.r2); atom_weights.len()],
            };
            Regime::constant(piece, r.g)
        })
        .collect();
    RegimeModel::new(Dims { n1: 1, n2: 1, m1: 1, m2: 1 }, horizon, q, nu, pi1, pi2, regimes)
}

/// One regime, no jumps, `A = C = Q = 0`, `B1 = D = R1 = G = 1`, unconstrained.
/// Its Riccati equation is `P' = P²/(1+P)`, solved implicitly by
/// `ln P - 1/P = t - T - 1`.
pub fn classical_lq(horizon: f64) -> Result<RegimeModel> {
    let r = ScalarRegime { b1: 1.0, d: 1.0, r1: 1.0, g: 1.0, r2: 1.0, ..Default::default() };
    scalar_model(horizon, &[&[0.0]], &[], &[r], ConeSpec::full_space(1), ConeSpec::full_space(1))
}

/// Zero dynamics and zero running weights; terminal weight `g`.
pub fn zero_dynamics(horizon: f64, g: f64) -> Result<RegimeModel> {
    let r = ScalarRegime { r1: 1.0, r2: 1.0, g, ..Default::default() };
    scalar_model(horizon, &[&[0.0]], &[1.0], &[r], ConeSpec::full_space(1), ConeSpec::full_space(1))
}

/// Two regimes with one jump atom; in regime 1 the jump flips the sign of the
/// state (`1 + E < 0`). `Π1 = ℝ`, `Π2 = ℝ₊`.
pub fn sign_flip() -> Result<RegimeModel> {
    sign_flip_with(ConeSpec::full_space(1), ConeSpec::nonnegative_orthant(1))
}

pub fn sign_flip_with(pi1: ConeSpec, pi2: ConeSpec) -> Result<RegimeModel> {
    let r1 = ScalarRegime {
        a: 0.2,
        b1: 1.0,
        c: 0.3,
        d: 0.5,
        r1: 1.0,
        q: 1.0,
        g: 1.0,
        b2: 0.5,
        e: -1.5,
        f: 0.8,
        r2: 1.0,
    };
    let r2 = ScalarRegime {
        a: -0.3,
        b1: -0.5,
        c: 0.2,
        d: 0.3,
        r1: 0.5,
        q: 0.5,
        g: 2.0,
        b2: -0.3,
        e: 0.4,
        f: 0.5,
        r2: 0.8,
    };
    scalar_model(1.0, &[&[-1.0, 1.0], &[2.0, -2.0]], &[0.5], &[r1, r2], pi1, pi2)
}

/// Singular case II: `G = 1 = δ`, `D = F = 1`, `R1 = R2 = 0`.
pub fn case_ii() -> Result<(RegimeModel, CaseFlags)> {
    let r = ScalarRegime { a: 0.1, b1: 0.5, c: 0.2, d: 1.0, q: 0.5, g: 1.0, b2: 0.3, e: -0.5, f: 1.0, ..Default::default() };
    let m = scalar_model(1.0, &[&[0.0]], &[1.0], &[r], ConeSpec::full_space(1), ConeSpec::full_space(1))?;
    Ok((m, CaseFlags::singular(SingularCase::II, 1.0)))
}
