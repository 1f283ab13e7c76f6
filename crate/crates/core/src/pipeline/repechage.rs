//! Per-cluster recovery of flagged points.

use crate::clustering::ClusterLabels;

/// Lower `q`-quantile with linear interpolation between order statistics.
pub fn lower_quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredCluster {
    pub alpha: usize,
    /// Flagged ids carrying this label, ascending.
    pub flagged: Vec<usize>,
    pub pruned_count: usize,
    pub threshold: f64,
    /// Flagged ids with a score at or above `threshold`, ascending.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Repechage {
    pub clusters: Vec<RecoveredCluster>,
    /// Labels whose cluster holds no pruned point.
    pub dropped: Vec<usize>,
    /// Flagged ids labelled as noise.
    pub noise: Vec<usize>,
}

/// Recovers each cluster's members above the lower `q`-quantile of the
/// scores of its pruned points.
///
/// `flagged` is ascending and `labels` is parallel to it; `pruned` is
/// ascending; `upsilon` maps a scanned id to its initial score.
pub fn repechage(
    flagged: &[usize],
    labels: &ClusterLabels,
    pruned: &[usize],
    upsilon: impl Fn(usize) -> f64,
    q: f64,
) -> Repechage {
    let mut out = Repechage::default();
    let mut by_alpha: Vec<Vec<usize>> = vec![Vec::new(); labels.n_clusters()];
    for (i, &id) in flagged.iter().enumerate() {
        match labels.label(i) {
            Some(alpha) => by_alpha[alpha].push(id),
            None => out.noise.push(id),
        }
    }
    for (alpha, ids) in by_alpha.into_iter().enumerate() {
        let pruned_scores: Vec<f64> = ids
            .iter()
            .filter(|id| pruned.binary_search(id).is_ok())
            .map(|&id| upsilon(id))
            .collect();
        let Some(threshold) = lower_quantile(&pruned_scores, q) else {
            out.dropped.push(alpha);
            continue;
        };
        let members = ids
            .iter()
            .copied()
            .filter(|&id| upsilon(id) >= threshold)
            .collect();
        out.clusters.push(RecoveredCluster {
            alpha,
            pruned_count: pruned_scores.len(),
            flagged: ids,
            threshold,
            members,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        assert_eq!(lower_quantile(&[22.0, 20.0, 21.0], 0.0), Some(20.0));
        assert!((lower_quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.01).unwrap() - 1.04).abs() < 1e-12);
        assert_eq!(lower_quantile(&[4.0], 0.3), Some(4.0));
        assert_eq!(lower_quantile(&[], 0.3), None);
    }

    #[test]
    fn members_and_dropped_clusters() {
        let flagged = [1, 3, 4, 6, 8, 9];
        let labels = ClusterLabels::from_raw(
            &[Some(0), Some(0), Some(0), Some(1), Some(1), None],
            1,
        );
        let scores = |id: usize| [0.0, 21.0, 0.0, 19.0, 20.0, 0.0, 30.0, 0.0, 30.0, 15.0][id];
        let r = repechage(&flagged, &labels, &[4, 7], scores, 0.0);
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.clusters[0].threshold, 20.0);
        assert_eq!(r.clusters[0].members, vec![1, 4]);
        assert_eq!(r.dropped, vec![1]);
        assert_eq!(r.noise, vec![9]);
    }
}
