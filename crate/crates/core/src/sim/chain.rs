//! Exact simulation of the regime chain.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;

/// Right-continuous piecewise-constant trajectory: `states[k]` holds on
/// `[epochs[k], epochs[k+1])`, with `epochs[0] = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegimePath {
    pub epochs: Vec<f64>,
    pub states: Vec<usize>,
}

impl RegimePath {
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.epochs.partition_point(|&e| e <= t);
        self.states[k.saturating_sub(1)]
    }

    /// Fraction of `[0, horizon]` spent in each state.
    pub fn occupation(&self, n_states: usize, horizon: f64) -> Vec<f64> {
        let mut occ = vec![0.0; n_states];
        for k in 0..self.states.len() {
            let end = self.epochs.get(k + 1).copied().unwrap_or(horizon);
            occ[self.states[k]] += end - self.epochs[k];
        }
        occ.iter_mut().for_each(|o| *o /= horizon);
        occ
    }
}

/// Holding times are exponential with rate `-q_ii`; the next state is `j`
/// with probability `q_ij / -q_ii`. States with `q_ii = 0` are absorbing.
pub fn simulate_chain<R: Rng + ?Sized>(generator: &DMatrix<f64>, i0: usize, horizon: f64, rng: &mut R) -> RegimePath {
    let mut path = RegimePath { epochs: vec![0.0], states: vec![i0] };
    simulate_chain_into(generator, i0, horizon, rng, &mut path);
    path
}

pub(crate) fn simulate_chain_into<R: Rng + ?Sized>(
    generator: &DMatrix<f64>,
    i0: usize,
    horizon: f64,
    rng: &mut R,
    path: &mut RegimePath,
) {
    path.epochs.clear();
    path.states.clear();
    path.epochs.push(0.0);
    path.states.push(i0);
    let ell = generator.nrows();
    let mut t = 0.0;
    let mut i = i0;
    loop {
        let rate = -generator[(i, i)];
        if rate <= 0.0 {
            return;
        }
        let hold: f64 = rng.sample(Exp1);
        t += hold / rate;
        if t >= horizon {
            return;
        }
        let mut u = rng.random::<f64>() * rate;
        let mut next = i;
        for j in 0..ell {
            if j == i {
                continue;
            }
            let q = generator[(i, j)];
            if q <= 0.0 {
                continue;
            }
            next = j;
            if u < q {
                break;
            }
            u -= q;
        }
        i = next;
        path.epochs.push(t);
        path.states.push(i);
    }
}
