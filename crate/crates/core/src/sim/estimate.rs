use rayon::prelude::*;
use serde::Serialize;

use super::{coefficient_knots, run_path, ControlPolicy, Workspace};
use crate::error::{Error, Result};
use crate::model::RegimeModel;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "REGIME_LQ_THREADS";

/// At most this fraction of exploded paths is tolerated.
pub const MAX_EXPLODED_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Uniform Euler steps before event refinement.
    pub grid_sim: usize,
    pub n_paths: u64,
    pub seed: u64,
    /// `None` uses every available core (still capped by `REGIME_LQ_THREADS`).
    pub workers: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { grid_sim: 200, n_paths: 10_000, seed: 0, workers: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Paths that entered the estimate.
    pub n_paths: u64,
    pub n_exploded: u64,
    pub ci95: (f64, f64),
}

impl McEstimate {
    /// Mean and standard error of `samples`, summed in a fixed pairwise order.
    pub fn from_samples(samples: &[f64], n_exploded: u64) -> Self {
        let n = samples.len() as f64;
        let mean = pairwise_sum(samples) / n;
        let dev: Vec<f64> = samples.iter().map(|c| (c - mean) * (c - mean)).collect();
        let var = if samples.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
        let std_error = (var / n).sqrt();
        Self {
            mean,
            std_error,
            n_paths: samples.len() as u64,
            n_exploded,
            ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error),
        }
    }
}

/// Tree reduction with a fixed shape, so the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Requested workers (or all cores), capped by `REGIME_LQ_THREADS`.
pub fn effective_workers(requested: Option<usize>) -> usize {
    let base = requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    cap.map_or(base, |c| base.min(c)).max(1)
}

/// Monte Carlo estimate of the cost of `policy` from `(x0, i0)`.
pub fn estimate_cost(
    model: &RegimeModel,
    policy: &dyn ControlPolicy,
    x0: f64,
    i0: usize,
    cfg: &SimConfig,
) -> Result<McEstimate> {
    if cfg.n_paths < 2 {
        return Err(Error::Config(format!("need at least 2 paths, got {}", cfg.n_paths)));
    }
    if cfg.grid_sim == 0 {
        return Err(Error::Config("simulation grid needs at least one step".into()));
    }
    if i0 >= model.n_regimes() {
        return Err(Error::Config(format!("initial regime {} out of range 1..={}", i0 + 1, model.n_regimes())));
    }
    let knots = coefficient_knots(model);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(effective_workers(cfg.workers))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<f64>> = pool.install(|| {
        (0..cfg.n_paths)
            .into_par_iter()
            .map_init(
                || Workspace::new(model),
                |ws, id| {
                    run_path(model, policy, x0, i0, cfg.grid_sim, cfg.seed, id, &knots, ws, None).map(|(c, _)| c)
                },
            )
            .collect()
    });

    let mut costs = Vec::with_capacity(results.len());
    let mut exploded = 0u64;
    for r in results {
        match r {
            Ok(c) => costs.push(c),
            Err(Error::ExplodedPath { .. }) => exploded += 1,
            Err(e) => return Err(e),
        }
    }
    if exploded as f64 > MAX_EXPLODED_FRACTION * cfg.n_paths as f64 {
        return Err(Error::TooManyExploded { exploded, n_paths: cfg.n_paths });
    }
    if costs.len() < 2 {
        return Err(Error::TooManyExploded { exploded, n_paths: cfg.n_paths });
    }
    Ok(McEstimate::from_samples(&costs, exploded))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_plain_sum_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn estimate_statistics() {
        let e = McEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0], 0);
        assert_eq!(e.mean, 2.5);
        let se = (5.0f64 / 3.0 / 4.0).sqrt();
        assert!((e.std_error - se).abs() < 1e-15);
        assert!((e.ci95.0 - (2.5 - 1.96 * se)).abs() < 1e-15);
    }
}
