//! Posterior and variational summaries: predictive link probabilities,
//! their separation by observed class, and per-node Fréchet means.

use crate::bbvi::VariationalState;
use crate::distributions::DistributionError;
use crate::geometry::{distance, frechet_mean, LatentPoint};
use crate::mcmc::McmcTrace;
use crate::model::{edge_probability, Network};
use crate::par::{compensated_sum, map_range, Execution};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Joint draws taken from a fitted variational approximation.
pub const VI_PREDICTIVE_DRAWS: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluateError {
    #[error("all {0} dyads share one label; separation needs both classes")]
    SingleClass(usize),
    #[error("no samples to summarize")]
    NoSamples,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// One joint draw of `(α, Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub alpha: f64,
    pub z: Vec<LatentPoint>,
}

/// Stored MCMC samples after `burnin` iterations.
pub fn trace_samples(trace: &McmcTrace, burnin: usize) -> Vec<PosteriorSample> {
    let k0 = trace.first_after(burnin);
    trace.alpha_samples[k0..]
        .iter()
        .zip(&trace.z_samples[k0..])
        .map(|(&alpha, z)| PosteriorSample { alpha, z: z.clone() })
        .collect()
}

/// `draws` joint samples from `q`.
pub fn variational_samples<R: Rng + ?Sized>(
    state: &VariationalState,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<PosteriorSample>, EvaluateError> {
    (0..draws)
        .map(|_| {
            let (alpha, z) = state.sample(rng)?;
            Ok(PosteriorSample { alpha, z })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveRecord {
    pub i: usize,
    pub j: usize,
    pub y: bool,
    pub mean_p: f64,
}

/// Mean link probability over samples for every dyad `i < j`, in
/// lexicographic order.
pub fn posterior_predictive_probs(
    y: &Network,
    samples: &[PosteriorSample],
    exec: Execution,
) -> Result<Vec<PredictiveRecord>, EvaluateError> {
    if samples.is_empty() {
        return Err(EvaluateError::NoSamples);
    }
    let n = y.node_count();
    let rows = map_range(exec, n, |i| {
        (i + 1..n)
            .map(|j| {
                let p = compensated_sum(samples.iter().map(|s| edge_probability(s.alpha, distance(&s.z[i], &s.z[j]))))
                    / samples.len() as f64;
                PredictiveRecord { i, j, y: y.has_edge(i, j), mean_p: p }
            })
            .collect::<Vec<_>>()
    });
    Ok(rows.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationStats {
    pub mean_p_link: f64,
    pub mean_p_nonlink: f64,
    /// Probability that a random linked dyad outscores a random unlinked
    /// one, ties counting one half.
    pub auc: f64,
}

impl SeparationStats {
    pub fn gap(&self) -> f64 {
        self.mean_p_link - self.mean_p_nonlink
    }
}

/// Class means and the rank-based AUC (average ranks for ties).
pub fn separation_stats(records: &[PredictiveRecord]) -> Result<SeparationStats, EvaluateError> {
    let n1 = records.iter().filter(|r| r.y).count();
    let n0 = records.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(EvaluateError::SingleClass(records.len()));
    }
    let mean = |cls: bool, count: usize| {
        compensated_sum(records.iter().filter(|r| r.y == cls).map(|r| r.mean_p)) / count as f64
    };
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].mean_p.total_cmp(&records[b].mean_p));
    let mut rank_sum_links = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && records[order[end]].mean_p == records[order[start]].mean_p {
            end += 1;
        }
        // ranks start+1 ..= end share their average
        let avg_rank = (start + end + 1) as f64 / 2.0;
        rank_sum_links += avg_rank * order[start..end].iter().filter(|&&k| records[k].y).count() as f64;
        start = end;
    }
    let (n1f, n0f) = (n1 as f64, n0 as f64);
    let auc = (rank_sum_links - n1f * (n1f + 1.0) / 2.0) / (n1f * n0f);
    Ok(SeparationStats { mean_p_link: mean(true, n1), mean_p_nonlink: mean(false, n0), auc })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentSummary {
    pub mean: LatentPoint,
    /// Mean squared geodesic distance of the samples from `mean`.
    pub dispersion: f64,
}

/// Per-node Fréchet mean and dispersion over configurations.
pub fn summarize_latent(samples: &[Vec<LatentPoint>], exec: Execution) -> Result<Vec<LatentSummary>, EvaluateError> {
    let first = samples.first().ok_or(EvaluateError::NoSamples)?;
    Ok(map_range(exec, first.len(), |i| {
        let points: Vec<LatentPoint> = samples.iter().map(|z| z[i]).collect();
        let mean = if points.iter().all(|p| *p == points[0]) {
            points[0]
        } else {
            frechet_mean(&points).expect("non-empty").point
        };
        let dispersion = compensated_sum(points.iter().map(|p| distance(&mean, p).powi(2))) / points.len() as f64;
        LatentSummary { mean, dispersion }
    }))
}
