//! Critical score thresholds under the coin-flip null.
//!
//! Under the null every neighbour label is an independent Bernoulli draw, so
//! the running count `S_K` is a lattice random walk and the maximum profile
//! score exceeds `t` exactly when the walk touches the boundary
//! `b*(K) = min{b : Υ(K, b) ≥ t}`. The exact method propagates the walk's
//! distribution with that boundary absorbing.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binomial::UpsilonTable;
use crate::error::{Error, Result};
use crate::model::ThresholdMethod;

/// Sequences simulated per independent random stream.
const MC_BATCH: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    pub k_max: usize,
    pub p_success: f64,
    pub p_ext: f64,
    pub threshold: f64,
    pub method: ThresholdMethod,
    /// Simulated sequences, zero for the exact method.
    pub mc_sample_count: usize,
    /// Null probability of reaching `threshold`: exact for the dynamic
    /// program, the empirical fraction for Monte-Carlo.
    pub exceedance: f64,
    /// Order-statistic standard error of a Monte-Carlo threshold.
    pub standard_error: Option<f64>,
}

/// Sorted distinct score values: the only thresholds that can be attained.
fn candidates(table: &UpsilonTable) -> Vec<f64> {
    let mut v = table.values().to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v.dedup();
    v
}

/// Probability that the null walk reaches a score of at least `t`.
pub fn crossing_probability(table: &UpsilonTable, t: f64) -> f64 {
    let k_max = table.k_max();
    let p = table.p_success();
    let q = 1.0 - p;
    let mut dist = vec![0.0; k_max + 2];
    let mut next = vec![0.0; k_max + 2];
    dist[0] = 1.0;
    // States at or above the previous boundary are already absorbed.
    let mut live = 1;
    let mut absorbed = 0.0;
    for k in 1..=k_max {
        if live == 0 {
            break;
        }
        // Reachable counts after this step are 0..=top.
        let top = live;
        next[0] = dist[0] * q;
        for b in 1..top {
            next[b] = dist[b] * q + dist[b - 1] * p;
        }
        next[top] = dist[top - 1] * p;
        let boundary = table.row(k).partition_point(|&v| v < t);
        let end = top + 1;
        if boundary < end {
            absorbed += next[boundary..end].iter().sum::<f64>();
            next[boundary..end].fill(0.0);
        }
        live = boundary.min(end);
        std::mem::swap(&mut dist, &mut next);
    }
    absorbed
}

fn exact_threshold(table: &UpsilonTable, p_ext: f64) -> Result<(f64, f64)> {
    let cand = candidates(table);
    let top = *cand.last().expect("table is never empty");
    let at_top = crossing_probability(table, top);
    if at_top > p_ext {
        return Err(Error::UnreachableExtremeness {
            p_ext,
            max_threshold: top,
            min_probability: at_top,
        });
    }
    // Crossing probability is non-increasing in t.
    let (mut lo, mut hi) = (0, cand.len() - 1);
    let mut prob = at_top;
    while lo < hi {
        let mid = (lo + hi) / 2;
        let c = crossing_probability(table, cand[mid]);
        if c <= p_ext {
            hi = mid;
            prob = c;
        } else {
            lo = mid + 1;
        }
    }
    if hi == cand.len() - 1 {
        prob = at_top;
    }
    Ok((cand[hi], prob))
}

/// Maximum profile score of each of `n` simulated null sequences.
///
/// Batch `i` draws from its own ChaCha stream, so the output does not depend
/// on how batches are scheduled across threads.
pub fn simulate_null_maxima(table: &UpsilonTable, n: usize, seed: u64) -> Vec<f64> {
    let k_max = table.k_max();
    // Bernoulli(p) as a comparison against a uniform 64-bit draw.
    let cut = (table.p_success() * 18_446_744_073_709_551_616.0) as u64;
    let batches = n.div_ceil(MC_BATCH);
    let per_batch: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|batch| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(batch as u64);
            let len = MC_BATCH.min(n - batch * MC_BATCH);
            (0..len)
                .map(|_| {
                    let mut count = 0;
                    let mut best: f64 = 0.0;
                    for k in 1..=k_max {
                        count += (rng.next_u64() < cut) as usize;
                        best = best.max(table.get(k, count));
                    }
                    best
                })
                .collect()
        })
        .collect();
    per_batch.concat()
}

/// Smallest candidate strictly above the `j`-th largest simulated maximum.
fn above_order_stat(sorted_desc: &[f64], cand: &[f64], j: usize) -> f64 {
    let v = sorted_desc[j.min(sorted_desc.len() - 1)];
    let i = cand.partition_point(|&c| c <= v);
    cand.get(i).copied().unwrap_or(f64::INFINITY)
}

fn monte_carlo_threshold(
    table: &UpsilonTable,
    p_ext: f64,
    n: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let cand = candidates(table);
    let top = *cand.last().expect("table is never empty");
    let at_top = table.p_success().powi(table.k_max() as i32);
    if at_top > p_ext {
        return Err(Error::UnreachableExtremeness {
            p_ext,
            max_threshold: top,
            min_probability: at_top,
        });
    }
    let mut maxima = simulate_null_maxima(table, n, seed);
    maxima.sort_unstable_by(|a, b| b.total_cmp(a));
    // With m = ⌊n·p_ext⌋, at most m simulated maxima reach the threshold.
    let m = (n as f64 * p_ext).floor() as usize;
    let threshold = above_order_stat(&maxima, &cand, m).min(top);
    let delta = (n as f64 * p_ext * (1.0 - p_ext)).sqrt().ceil().max(1.0) as usize;
    let upper = above_order_stat(&maxima, &cand, m.saturating_sub(delta)).min(top);
    let lower = above_order_stat(&maxima, &cand, m + delta).min(top);
    let se = 0.5 * (upper - lower);
    let hits = maxima.partition_point(|&v| v >= threshold);
    Ok((threshold, se, hits as f64 / n as f64))
}

/// Critical threshold at extremeness `p_ext` for the maximum score over
/// ranks `1..=k_max` with neighbour success probability `p_success`.
pub fn null_threshold(
    k_max: usize,
    p_success: f64,
    p_ext: f64,
    method: ThresholdMethod,
    seed: u64,
    n_null_sequences: usize,
) -> Result<NullModel> {
    let table = UpsilonTable::new(k_max, p_success)?;
    null_threshold_with_table(&table, p_ext, method, seed, n_null_sequences)
}

pub(crate) fn null_threshold_with_table(
    table: &UpsilonTable,
    p_ext: f64,
    method: ThresholdMethod,
    seed: u64,
    n_null_sequences: usize,
) -> Result<NullModel> {
    if !(p_ext > 0.0 && p_ext < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "p_ext must lie in (0, 1), got {p_ext}"
        )));
    }
    let model = NullModel {
        k_max: table.k_max(),
        p_success: table.p_success(),
        p_ext,
        threshold: 0.0,
        method,
        mc_sample_count: 0,
        exceedance: 0.0,
        standard_error: None,
    };
    match method {
        ThresholdMethod::ExactDp => {
            let (threshold, exceedance) = exact_threshold(table, p_ext)?;
            Ok(NullModel {
                threshold,
                exceedance,
                ..model
            })
        }
        ThresholdMethod::MonteCarlo => {
            if n_null_sequences == 0 {
                return Err(Error::InvalidConfig(
                    "n_null_sequences must be positive".into(),
                ));
            }
            let (threshold, se, exceedance) =
                monte_carlo_threshold(table, p_ext, n_null_sequences, seed)?;
            Ok(NullModel {
                threshold,
                exceedance,
                mc_sample_count: n_null_sequences,
                standard_error: Some(se),
                ..model
            })
        }
    }
}
