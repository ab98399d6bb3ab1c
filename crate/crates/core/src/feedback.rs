//! State-feedback law built from a Riccati solution.
//!
//! `u1 = v̂11(i,t) X⁺ + v̂21(i,t) X⁻` and `u2(z) = v̂12(i,t,z) X⁺ + v̂22(i,t,z) X⁻`,
//! with the argmin tables cached on the solver grid and read left-constant.

use std::io::Write;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hamiltonians::{minimize, RiccatiPoint, Which};
use crate::model::RegimeModel;
use crate::riccati::{RiccatiSolution, SolverGrid};

#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    solution: RiccatiSolution,
    grid: SolverGrid,
    m1: usize,
    m2: usize,
    n_atoms: usize,
    // v11[i][n], v12[i][n][atom]
    v11: Vec<Vec<DVector<f64>>>,
    v21: Vec<Vec<DVector<f64>>>,
    v12: Vec<Vec<Vec<DVector<f64>>>>,
    v22: Vec<Vec<Vec<DVector<f64>>>>,
}

/// Minimize every Hamiltonian at every (regime, node, atom), starting from 0.
pub fn build_law(model: &RegimeModel, solution: &RiccatiSolution) -> Result<FeedbackLaw> {
    let grid = *solution.grid();
    let ell = model.n_regimes();
    if solution.n_regimes() != ell {
        return Err(Error::DimensionMismatch { what: "solution regimes".into(), expected: ell, got: solution.n_regimes() });
    }
    let n_atoms = model.nu().len();
    let dims = model.dims();
    let mut v11 = Vec::with_capacity(ell);
    let mut v21 = Vec::with_capacity(ell);
    let mut v12 = Vec::with_capacity(ell);
    let mut v22 = Vec::with_capacity(ell);
    for i in 0..ell {
        let (mut a11, mut a21, mut a12, mut a22) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for n in 0..=grid.steps {
            let t = grid.node(n);
            let pt = RiccatiPoint::for_model(model, solution.p1(i, n), solution.p2(i, n));
            a11.push(minimize(Which::H11, model, i, t, None, &pt, None)?.argmin);
            a21.push(minimize(Which::H21, model, i, t, None, &pt, None)?.argmin);
            let mut j12 = Vec::with_capacity(n_atoms);
            let mut j22 = Vec::with_capacity(n_atoms);
            for a in 0..n_atoms {
                j12.push(minimize(Which::H12, model, i, t, Some(a), &pt, None)?.argmin);
                j22.push(minimize(Which::H22, model, i, t, Some(a), &pt, None)?.argmin);
            }
            a12.push(j12);
            a22.push(j22);
        }
        v11.push(a11);
        v21.push(a21);
        v12.push(a12);
        v22.push(a22);
    }
    Ok(FeedbackLaw { solution: solution.clone(), grid, m1: dims.m1, m2: dims.m2, n_atoms, v11, v21, v12, v22 })
}

impl FeedbackLaw {
    pub fn solution(&self) -> &RiccatiSolution {
        &self.solution
    }

    pub fn grid(&self) -> &SolverGrid {
        &self.grid
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn v11(&self, i: usize, n: usize) -> &DVector<f64> {
        &self.v11[i][n]
    }

    pub fn v21(&self, i: usize, n: usize) -> &DVector<f64> {
        &self.v21[i][n]
    }

    pub fn v12(&self, i: usize, n: usize, atom: usize) -> &DVector<f64> {
        &self.v12[i][n][atom]
    }

    pub fn v22(&self, i: usize, n: usize, atom: usize) -> &DVector<f64> {
        &self.v22[i][n][atom]
    }

    /// Table node in force at `t` (left-constant).
    pub fn node_at(&self, t: f64) -> Result<usize> {
        let horizon = self.grid.horizon;
        if !(t >= -1e-12 * horizon && t <= horizon * (1.0 + 1e-12)) {
            return Err(Error::TimeOutOfRange { t, horizon });
        }
        Ok(self.grid.index_at(t.max(0.0)))
    }

    /// `(u1, u2 per atom)` for left limits `x_left = X(t-)` and regime `α(t-) = i`.
    pub fn control_at(&self, t: f64, x_left: f64, regime: usize) -> Result<(DVector<f64>, Vec<DVector<f64>>)> {
        let mut u1 = DVector::zeros(self.m1);
        let mut u2 = vec![DVector::zeros(self.m2); self.n_atoms];
        let n = self.node_at(t)?;
        self.control_into(n, x_left, regime, &mut u1, &mut u2);
        Ok((u1, u2))
    }

    /// Allocation-free form of [`Self::control_at`] at table node `n`.
    pub fn control_into(&self, n: usize, x: f64, i: usize, u1: &mut DVector<f64>, u2: &mut [DVector<f64>]) {
        if x > 0.0 {
            u1.copy_from(&self.v11[i][n]);
            *u1 *= x;
            for (a, u) in u2.iter_mut().enumerate() {
                u.copy_from(&self.v12[i][n][a]);
                *u *= x;
            }
        } else if x < 0.0 {
            u1.copy_from(&self.v21[i][n]);
            *u1 *= -x;
            for (a, u) in u2.iter_mut().enumerate() {
                u.copy_from(&self.v22[i][n][a]);
                *u *= -x;
            }
        } else {
            u1.fill(0.0);
            u2.iter_mut().for_each(|u| u.fill(0.0));
        }
    }

    /// Long-format CSV `t,regime,table,atom,index,value` (regime and atom 1-based, atom 0 for diffusion tables).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,regime,table,atom,index,value")?;
        for i in 0..self.v11.len() {
            for n in 0..=self.grid.steps {
                let t = self.grid.node(n);
                for (name, v) in [("v11", &self.v11[i][n]), ("v21", &self.v21[i][n])] {
                    for (k, x) in v.iter().enumerate() {
                        writeln!(w, "{t:.16e},{},{name},0,{},{x:.16e}", i + 1, k + 1)?;
                    }
                }
                for a in 0..self.n_atoms {
                    for (name, v) in [("v12", &self.v12[i][n][a]), ("v22", &self.v22[i][n][a])] {
                        for (k, x) in v.iter().enumerate() {
                            writeln!(w, "{t:.16e},{},{name},{},{},{x:.16e}", i + 1, a + 1, k + 1)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
