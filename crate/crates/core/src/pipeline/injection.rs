//! Background injection: points of the opposite sample scored as though they
//! belonged to the scanned one.
//!
//! The success probability stays at its pooled value instead of being
//! recomputed for a sample one point larger; the difference is `O(1/n)`.

use rayon::prelude::*;

use crate::clustering::ClusterLabels;
use crate::error::Result;
use crate::model::{Dataset, Direction, EagleEyeConfig};
use crate::neighbors::{build_union_index, KdTree, UnionIndex};
use crate::scoring::{scan_probability, UpsilonTable};

/// Injection score of every point of the sample opposite to `direction`.
pub(crate) fn injection_scores(
    index: &UnionIndex,
    direction: Direction,
    table: &UpsilonTable,
) -> Result<Vec<f64>> {
    let scanned = direction.scanned();
    index
        .block(scanned.other())
        .into_par_iter()
        .map(|u| {
            let nn = index.knn(index.point(u), table.k_max(), Some(u), None)?;
            Ok(table.score(&index.labels_of(&nn, scanned)).0)
        })
        .collect()
}

/// Ids (in the opposite sample) whose injection score reaches `threshold`.
pub fn inject_background(
    reference: &Dataset,
    test: &Dataset,
    direction: Direction,
    threshold: f64,
    config: &EagleEyeConfig,
) -> Result<Vec<usize>> {
    let index = build_union_index(reference, test)?;
    let table = UpsilonTable::new(config.k_max, scan_probability(&index, direction))?;
    let scores = injection_scores(&index, direction, &table)?;
    Ok(select(&scores, threshold))
}

pub(crate) fn select(scores: &[f64], threshold: f64) -> Vec<usize> {
    (0..scores.len()).filter(|&i| scores[i] >= threshold).collect()
}

/// Attributes injected points to clusters.
///
/// Each injected point joins the cluster of its nearest flagged point (ties
/// to the smaller id) and is kept if its injection score reaches that
/// cluster's recovery threshold. Points whose nearest flagged point is
/// noise, or belongs to a cluster without a threshold, are left out.
/// Returns ascending id lists indexed by cluster label.
#[allow(clippy::too_many_arguments)]
pub fn assign_injected(
    injected: &[usize],
    opposite: &Dataset,
    injected_score: impl Fn(usize) -> f64,
    flagged: &[usize],
    scanned: &Dataset,
    labels: &ClusterLabels,
    thresholds: &[Option<f64>],
) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); labels.n_clusters()];
    if flagged.is_empty() {
        return out;
    }
    let dim = scanned.dim();
    let coords: Vec<f64> = flagged
        .iter()
        .flat_map(|&id| scanned.point(id).iter().copied())
        .collect();
    let tree = KdTree::build(&coords, dim);
    for &id in injected {
        let nearest = tree.knn(opposite.point(id), 1, |_| true)[0].id as usize;
        let Some(alpha) = labels.label(nearest) else {
            continue;
        };
        if thresholds[alpha].is_some_and(|t| injected_score(id) >= t) {
            out[alpha].push(id);
        }
    }
    out
}
