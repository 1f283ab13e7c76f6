//! Scoring a report against simulation labels.

use serde::{Deserialize, Serialize};

use super::GroundTruth;
use crate::model::{AnomalyReport, PartitionResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTruth {
    pub alpha: usize,
    /// Anomaly holding the plurality of the members; `None` when background
    /// points outnumber every anomaly.
    pub matched: Option<usize>,
    pub members: usize,
    /// Members that belong to `matched`.
    pub signal: usize,
    pub true_purity: Option<f64>,
    pub true_s_over_sqrt_b: Option<f64>,
}

/// Signal retained at each stage for one planted anomaly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyTruth {
    pub anomaly: usize,
    pub planted: usize,
    pub flagged_signal: usize,
    pub pruned_signal: usize,
    /// Members of this anomaly inside clusters matched to it.
    pub recovered_signal: usize,
    pub recall: Option<f64>,
    /// Cluster labels matched to this anomaly.
    pub clusters: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEvaluation {
    pub clusters: Vec<ClusterTruth>,
    pub anomalies: Vec<AnomalyTruth>,
}

impl TruthEvaluation {
    pub fn cluster(&self, alpha: usize) -> Option<&ClusterTruth> {
        self.clusters.iter().find(|c| c.alpha == alpha)
    }
}

/// Compares a report for the sample described by `truth` with its labels.
pub fn evaluate_against_truth(
    report: &AnomalyReport,
    partition: &PartitionResult,
    truth: &GroundTruth,
) -> TruthEvaluation {
    let n = truth.n_anomalies;
    let count_by = |ids: &[usize]| {
        let mut c = vec![0usize; n];
        for &id in ids {
            if let Some(a) = truth.labels[id] {
                c[a] += 1;
            }
        }
        c
    };
    let flagged = count_by(&partition.flagged);
    let pruned = count_by(&partition.pruned);
    let planted = truth.planted();

    let mut anomalies: Vec<AnomalyTruth> = (0..n)
        .map(|a| AnomalyTruth {
            anomaly: a,
            planted: planted[a],
            flagged_signal: flagged[a],
            pruned_signal: pruned[a],
            recovered_signal: 0,
            recall: None,
            clusters: Vec::new(),
        })
        .collect();

    let mut clusters = Vec::with_capacity(report.clusters.len());
    for c in &report.clusters {
        let per = count_by(&c.members);
        let background = c.members.len() - per.iter().sum::<usize>();
        // Plurality over anomalies and background; ties go to the lower anomaly.
        let best = (0..n).max_by(|&a, &b| per[a].cmp(&per[b]).then(b.cmp(&a)));
        let matched = best.filter(|&a| per[a] > 0 && per[a] >= background);
        let signal = matched.map_or(0, |a| per[a]);
        let members = c.members.len();
        if let Some(a) = matched {
            anomalies[a].recovered_signal += signal;
            anomalies[a].clusters.push(c.alpha);
        }
        let bkg = members - signal;
        clusters.push(ClusterTruth {
            alpha: c.alpha,
            matched,
            members,
            signal,
            true_purity: (members > 0).then(|| signal as f64 / members as f64),
            true_s_over_sqrt_b: (bkg > 0).then(|| signal as f64 / (bkg as f64).sqrt()),
        });
    }
    for a in &mut anomalies {
        a.recall = (a.planted > 0).then(|| a.recovered_signal as f64 / a.planted as f64);
    }
    TruthEvaluation {
        clusters,
        anomalies,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClusterAnomaly, Direction, Estimates, ReportTotals};

    fn report(clusters: Vec<Vec<usize>>) -> AnomalyReport {
        AnomalyReport {
            direction: Direction::TestOverdensity,
            clusters: clusters
                .into_iter()
                .enumerate()
                .map(|(alpha, members)| ClusterAnomaly {
                    alpha,
                    flagged: members.clone(),
                    pruned_count: 1,
                    repechage_threshold: 0.0,
                    members,
                    injected: Vec::new(),
                    estimates: Estimates::default(),
                })
                .collect(),
            dropped_clusters: Vec::new(),
            noise: Vec::new(),
            totals: ReportTotals::default(),
        }
    }

    fn partition(flagged: Vec<usize>) -> PartitionResult {
        PartitionResult {
            direction: Direction::TestOverdensity,
            threshold: 0.0,
            pruned: flagged.clone(),
            flagged,
            equalized: Vec::new(),
        }
    }

    fn truth() -> GroundTruth {
        GroundTruth {
            labels: vec![None, Some(0), Some(0), Some(1), Some(1), Some(1), None],
            n_anomalies: 2,
        }
    }

    #[test]
    fn perfect_report() {
        let r = report(vec![vec![3, 4, 5], vec![1, 2]]);
        let e = evaluate_against_truth(&r, &partition(vec![1, 2, 3, 4, 5]), &truth());
        for a in &e.anomalies {
            assert_eq!(a.recall, Some(1.0));
        }
        assert_eq!(e.cluster(0).unwrap().matched, Some(1));
        assert_eq!(e.cluster(1).unwrap().true_purity, Some(1.0));
        assert_eq!(e.cluster(1).unwrap().true_s_over_sqrt_b, None);
    }

    #[test]
    fn empty_report() {
        let e = evaluate_against_truth(&report(vec![]), &partition(vec![]), &truth());
        assert!(e.anomalies.iter().all(|a| a.recall == Some(0.0)));
    }

    #[test]
    fn contaminated_cluster() {
        let r = report(vec![vec![0, 3, 4, 6]]);
        let e = evaluate_against_truth(&r, &partition(vec![0, 3, 4, 6]), &truth());
        let c = e.cluster(0).unwrap();
        assert_eq!((c.matched, c.signal), (Some(1), 2));
        assert_eq!(c.true_purity, Some(0.5));
        assert!((c.true_s_over_sqrt_b.unwrap() - 2.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((e.anomalies[1].recall.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }
}
