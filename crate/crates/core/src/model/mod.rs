//! Domain types for the regime-switching jump LQ problem.
//!
//! The state is scalar. Each regime carries coefficient tables that are
//! piecewise constant in time: the value on `[knot_k, knot_{k+1})` is the
//! k-th piece, and the first piece extends to the left of the first knot.

mod cone;
pub mod config;
mod validate;

use nalgebra::{DMatrix, DVector};

pub use cone::{ConeKind, ConeSpec, MAX_GENERATORS};
pub(crate) use validate::min_eigenvalue;
pub use validate::{validate, CaseFlags, CheckResult, SingularCase, ValidationReport};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// Brownian dimension.
    pub n1: usize,
    /// Number of Poisson jump components.
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub mark: Vec<f64>,
    pub weight: f64,
}

/// Finite jump measure on the mark space, represented by weighted atoms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JumpMeasure {
    atoms: Vec<Atom>,
    total_mass: f64,
}

impl JumpMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let mut total = 0.0;
        for (k, a) in atoms.iter().enumerate() {
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return Err(Error::Config(format!("jump atom {k} has invalid weight {}", a.weight)));
            }
            total += a.weight;
        }
        Ok(Self { atoms, total_mass: total })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn weight(&self, atom: usize) -> f64 {
        self.atoms[atom].weight
    }
}

/// Time-dependent coefficients of one regime that do not depend on the jump mark.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: f64,
    pub b1: DVector<f64>,
    pub c: DVector<f64>,
    /// n1 x m1
    pub d: DMatrix<f64>,
    pub r1: DMatrix<f64>,
    pub q: f64,
}

impl Coefficients {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            a: 0.0,
            b1: DVector::zeros(dims.m1),
            c: DVector::zeros(dims.n1),
            d: DMatrix::zeros(dims.n1, dims.m1),
            r1: DMatrix::zeros(dims.m1, dims.m1),
            q: 0.0,
        }
    }

    /// One-dimensional Brownian motion and control.
    pub fn scalar(a: f64, b1: f64, c: f64, d: f64, r1: f64, q: f64) -> Self {
        Self {
            a,
            b1: DVector::from_element(1, b1),
            c: DVector::from_element(1, c),
            d: DMatrix::from_element(1, 1, d),
            r1: DMatrix::from_element(1, 1, r1),
            q,
        }
    }

    /// `B1 + D'C`
    pub fn b1_eff(&self) -> DVector<f64> {
        &self.b1 + self.d.transpose() * &self.c
    }

    /// `D'D`
    pub fn dtd(&self) -> DMatrix<f64> {
        self.d.transpose() * &self.d
    }
}

/// Mark-dependent coefficients of one regime at one atom.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpCoefficients {
    pub b2: DVector<f64>,
    /// One entry per jump component.
    pub e: DVector<f64>,
    /// n2 x m2; row k drives jump component k.
    pub f: DMatrix<f64>,
    pub r2: DMatrix<f64>,
}

impl JumpCoefficients {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            b2: DVector::zeros(dims.m2),
            e: DVector::zeros(dims.n2),
            f: DMatrix::zeros(dims.n2, dims.m2),
            r2: DMatrix::zeros(dims.m2, dims.m2),
        }
    }

    pub fn scalar(b2: f64, e: f64, f: f64, r2: f64) -> Self {
        Self {
            b2: DVector::from_element(1, b2),
            e: DVector::from_element(1, e),
            f: DMatrix::from_element(1, 1, f),
            r2: DMatrix::from_element(1, 1, r2),
        }
    }
}

/// All coefficients of a regime on one constant piece.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub diffusion: Coefficients,
    /// Indexed by atom of the jump measure.
    pub jumps: Vec<JumpCoefficients>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    knots: Vec<f64>,
    pieces: Vec<Piece>,
    pub g: f64,
}

impl Regime {
    /// Piecewise-constant regime; `knots` strictly increasing, one piece per knot.
    pub fn new(knots: Vec<f64>, pieces: Vec<Piece>, g: f64) -> Result<Self> {
        if knots.is_empty() || knots.len() != pieces.len() {
            return Err(Error::Config(format!(
                "regime needs one coefficient piece per knot ({} knots, {} pieces)",
                knots.len(),
                pieces.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("coefficient knots must be strictly increasing".into()));
        }
        Ok(Self { knots, pieces, g })
    }

    pub fn constant(piece: Piece, g: f64) -> Self {
        Self { knots: vec![0.0], pieces: vec![piece], g }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn piece_at(&self, t: f64) -> &Piece {
        let k = self.knots.partition_point(|&k| k <= t);
        &self.pieces[k.saturating_sub(1)]
    }
}

/// Full problem data: dynamics, weights, regime chain, jump measure, cones.
#[derive(Debug, Clone)]
pub struct RegimeModel {
    dims: Dims,
    horizon: f64,
    generator: DMatrix<f64>,
    nu: JumpMeasure,
    pi1: ConeSpec,
    pi2: ConeSpec,
    regimes: Vec<Regime>,
}

impl RegimeModel {
    pub fn new(
        dims: Dims,
        horizon: f64,
        generator: DMatrix<f64>,
        nu: JumpMeasure,
        pi1: ConeSpec,
        pi2: ConeSpec,
        regimes: Vec<Regime>,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        let ell = regimes.len();
        if ell == 0 {
            return Err(Error::Config("at least one regime is required".into()));
        }
        if generator.nrows() != ell || generator.ncols() != ell {
            return Err(Error::DimensionMismatch {
                what: "generator rows/cols".into(),
                expected: ell,
                got: if generator.nrows() != ell { generator.nrows() } else { generator.ncols() },
            });
        }
        dim_check("cone Pi1", dims.m1, pi1.dim())?;
        dim_check("cone Pi2", dims.m2, pi2.dim())?;
        for r in &regimes {
            for p in &r.pieces {
                let c = &p.diffusion;
                dim_check("B1", dims.m1, c.b1.len())?;
                dim_check("C", dims.n1, c.c.len())?;
                dim_check("D rows", dims.n1, c.d.nrows())?;
                dim_check("D cols", dims.m1, c.d.ncols())?;
                dim_check("R1 rows", dims.m1, c.r1.nrows())?;
                dim_check("R1 cols", dims.m1, c.r1.ncols())?;
                dim_check("jump coefficient atoms", nu.len(), p.jumps.len())?;
                for j in &p.jumps {
                    dim_check("B2", dims.m2, j.b2.len())?;
                    dim_check("E", dims.n2, j.e.len())?;
                    dim_check("F rows", dims.n2, j.f.nrows())?;
                    dim_check("F cols", dims.m2, j.f.ncols())?;
                    dim_check("R2 rows", dims.m2, j.r2.nrows())?;
                    dim_check("R2 cols", dims.m2, j.r2.ncols())?;
                }
            }
        }
        Ok(Self { dims, horizon, generator, nu, pi1, pi2, regimes })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_regimes(&self) -> usize {
        self.regimes.len()
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn nu(&self) -> &JumpMeasure {
        &self.nu
    }

    pub fn pi1(&self) -> &ConeSpec {
        &self.pi1
    }

    pub fn pi2(&self) -> &ConeSpec {
        &self.pi2
    }

    pub fn regimes(&self) -> &[Regime] {
        &self.regimes
    }

    pub fn regime(&self, i: usize) -> &Regime {
        &self.regimes[i]
    }

    pub fn terminal_weight(&self, i: usize) -> f64 {
        self.regimes[i].g
    }

    pub fn piece(&self, i: usize, t: f64) -> &Piece {
        self.regimes[i].piece_at(t)
    }

    pub fn coefficients(&self, i: usize, t: f64) -> &Coefficients {
        &self.piece(i, t).diffusion
    }

    pub fn jump_coefficients(&self, i: usize, t: f64, atom: usize) -> &JumpCoefficients {
        &self.piece(i, t).jumps[atom]
    }

    /// Copy of the model with other cones.
    pub fn with_cones(&self, pi1: ConeSpec, pi2: ConeSpec) -> Result<Self> {
        Self::new(self.dims, self.horizon, self.generator.clone(), self.nu.clone(), pi1, pi2, self.regimes.clone())
    }
}

fn dim_check(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { what: what.into(), expected, got });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn left_constant_lookup() {
        let dims = Dims { n1: 1, n2: 1, m1: 1, m2: 1 };
        let mk = |a| Piece { diffusion: Coefficients { a, ..Coefficients::zeros(dims) }, jumps: vec![] };
        let r = Regime::new(vec![0.0, 0.5], vec![mk(1.0), mk(2.0)], 0.0).unwrap();
        assert_eq!(r.piece_at(0.0).diffusion.a, 1.0);
        assert_eq!(r.piece_at(0.4999).diffusion.a, 1.0);
        assert_eq!(r.piece_at(0.5).diffusion.a, 2.0);
        assert_eq!(r.piece_at(-1.0).diffusion.a, 1.0);
        assert_eq!(r.piece_at(7.0).diffusion.a, 2.0);
    }

    #[test]
    fn jump_measure_mass() {
        let nu = JumpMeasure::new(vec![
            Atom { mark: vec![1.0], weight: 0.25 },
            Atom { mark: vec![2.0], weight: 0.5 },
        ])
        .unwrap();
        assert_eq!(nu.total_mass(), 0.75);
        assert!(JumpMeasure::new(vec![Atom { mark: vec![], weight: -1.0 }]).is_err());
        assert_eq!(JumpMeasure::empty().total_mass(), 0.0);
    }

    #[test]
    fn rejects_mismatched_dims() {
        let dims = Dims { n1: 1, n2: 1, m1: 2, m2: 1 };
        let piece = Piece { diffusion: Coefficients::scalar(0.0, 0.0, 0.0, 0.0, 1.0, 0.0), jumps: vec![] };
        let err = RegimeModel::new(
            dims,
            1.0,
            DMatrix::zeros(1, 1),
            JumpMeasure::empty(),
            ConeSpec::full_space(2),
            ConeSpec::full_space(1),
            vec![Regime::constant(piece, 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }
}
