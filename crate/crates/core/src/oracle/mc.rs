//! Monte Carlo harnesses: estimator consistency across sample sizes and
//! the synthetic-vs-direct standard-error comparison. Replicates run in
//! parallel with seeds derived from the replicate index, so results are
//! independent of thread count.

use crate::data::PopulationTable;
use crate::estimators::{estimate_all_areas, EstimatorConfig, EstimatorError};
use crate::parallel::par_map_range;
use crate::rng::stream_seed;

use super::{DiscretePopulation, OracleError};

#[derive(Debug, Error)]
pub enum McError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("replicate {replicate} at n = {n} failed: {message}")]
    Replicate {
        n: usize,
        replicate: usize,
        message: String,
    },
}

use thiserror::Error;

#[derive(Debug, Clone)]
pub struct ConsistencyConfig {
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub estimator: EstimatorConfig,
}

/// Per-sample-size Monte Carlo summary.
#[derive(Debug, Clone)]
pub struct SizeReport {
    pub n: usize,
    /// Across-area RMSE against the true means, one entry per replicate.
    pub rmse: Vec<f64>,
    pub median_rmse: f64,
    /// Mean signed error per area over replicates.
    pub bias_per_area: Vec<f64>,
    /// Median over areas of `|bias|`.
    pub median_abs_bias: f64,
}

#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub truth: Vec<f64>,
    pub sizes: Vec<SizeReport>,
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Synthetic estimates for all areas of one drawn sample, in table area
/// order.
fn synthetic_estimates(
    pop: &DiscretePopulation,
    table: &PopulationTable,
    n: usize,
    seed: u64,
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>, McError> {
    let sample = pop.draw_sample(n, seed)?;
    let all = estimate_all_areas(&sample, table, cfg)?;
    let mut out = Vec::with_capacity(all.outcomes.len());
    for outcome in all.outcomes {
        match outcome.synthetic {
            Ok(r) => out.push(r.estimate),
            Err(e) => {
                return Err(McError::Replicate {
                    n,
                    replicate: 0,
                    message: format!("area '{}': {e}", outcome.area),
                })
            }
        }
    }
    Ok(out)
}

/// Repeatedly sample the population at each size and summarize how the
/// synthetic estimator's error shrinks.
pub fn run_consistency(
    pop: &DiscretePopulation,
    cfg: &ConsistencyConfig,
) -> Result<ConsistencyReport, McError> {
    let truth = pop.true_area_means()?;
    let table = pop.population_table();
    let n_areas = truth.len();
    let mut sizes = Vec::with_capacity(cfg.sample_sizes.len());

    for &n in &cfg.sample_sizes {
        let per_rep: Vec<Result<Vec<f64>, McError>> = par_map_range(cfg.replicates, |rep| {
            let seed = stream_seed(cfg.seed, &format!("mc/{n}/{rep}"));
            synthetic_estimates(pop, &table, n, seed, &cfg.estimator)
        });
        let mut rmse = Vec::with_capacity(cfg.replicates);
        let mut error_sums = vec![0.0; n_areas];
        for (rep, res) in per_rep.into_iter().enumerate() {
            let estimates = res.map_err(|e| match e {
                McError::Replicate { n, message, .. } => McError::Replicate {
                    n,
                    replicate: rep,
                    message,
                },
                other => other,
            })?;
            let mut sq = 0.0;
            for (j, (e, t)) in estimates.iter().zip(&truth).enumerate() {
                let d = e - t;
                sq += d * d;
                error_sums[j] += d;
            }
            rmse.push((sq / n_areas as f64).sqrt());
        }
        let bias_per_area: Vec<f64> = error_sums
            .iter()
            .map(|s| s / cfg.replicates as f64)
            .collect();
        let abs_bias: Vec<f64> = bias_per_area.iter().map(|b| b.abs()).collect();
        sizes.push(SizeReport {
            n,
            median_rmse: median(&rmse),
            rmse,
            median_abs_bias: median(&abs_bias),
            bias_per_area,
        });
    }
    Ok(ConsistencyReport { truth, sizes })
}

/// Outcome of the per-replicate standard-error comparison.
#[derive(Debug, Clone)]
pub struct SeComparison {
    pub replicates: usize,
    /// Replicates where the median synthetic SE across areas undercuts
    /// the median direct SE.
    pub synthetic_wins: usize,
    pub share: f64,
    pub median_synthetic_se: f64,
    pub median_direct_se: f64,
}

/// Compare reported standard errors of the two estimators over repeated
/// small-area samples (areas sized so direct estimates are noisy).
pub fn run_se_comparison(
    pop: &DiscretePopulation,
    n: usize,
    replicates: usize,
    seed: u64,
    cfg: &EstimatorConfig,
) -> Result<SeComparison, McError> {
    let table = pop.population_table();
    let per_rep: Vec<Result<Option<(f64, f64)>, McError>> = par_map_range(replicates, |rep| {
        let draw_seed = stream_seed(seed, &format!("se/{rep}"));
        let sample = pop.draw_sample(n, draw_seed)?;
        let all = estimate_all_areas(&sample, &table, cfg)?;
        let mut syn = Vec::new();
        let mut dir = Vec::new();
        for outcome in &all.outcomes {
            if let (Ok(s), Ok(d)) = (&outcome.synthetic, &outcome.direct) {
                syn.push(s.se);
                dir.push(d.se);
            }
        }
        if syn.is_empty() {
            return Ok(None);
        }
        Ok(Some((median(&syn), median(&dir))))
    });

    let mut synthetic_wins = 0;
    let mut used = 0;
    let mut syn_medians = Vec::new();
    let mut dir_medians = Vec::new();
    for res in per_rep {
        if let Some((s, d)) = res? {
            used += 1;
            syn_medians.push(s);
            dir_medians.push(d);
            if s < d {
                synthetic_wins += 1;
            }
        }
    }
    Ok(SeComparison {
        replicates: used,
        synthetic_wins,
        share: synthetic_wins as f64 / used.max(1) as f64,
        median_synthetic_se: median(&syn_medians),
        median_direct_se: median(&dir_medians),
    })
}
