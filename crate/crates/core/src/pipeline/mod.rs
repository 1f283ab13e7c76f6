//! End-to-end detection for both scan directions.

pub mod estimators;
pub mod ide;
pub mod injection;
pub mod repechage;

pub use estimators::{background_estimate, purity_estimate, s_over_sqrt_b_estimate, Reweighting};
pub use ide::{ide_prune, rescore_equalized};
pub use injection::{assign_injected, inject_background};
pub use repechage::{lower_quantile, repechage, Repechage};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{Clusterer, DensityPeaks};
use crate::error::{Error, Result};
use crate::model::{
    validate, AnomalyReport, ClusterAnomaly, Dataset, Direction, EagleEyeConfig, MembershipBits,
    PartitionResult, ReportTotals, Role, ScoreRecord, ThresholdMethod, Warning,
};
use crate::neighbors::{build_union_index, UnionIndex};
use crate::scoring::{null_threshold_with_table, scan_probability, NullModel, UpsilonTable};

/// Ids of records whose score reaches `threshold`, ascending.
pub fn flag(scores: &[ScoreRecord], threshold: f64) -> Vec<usize> {
    let mut ids: Vec<usize> = scores
        .iter()
        .filter(|r| r.upsilon >= threshold)
        .map(|r| r.point_id)
        .collect();
    ids.sort_unstable();
    ids
}

/// Deterministic facts about a run; no wall-clock data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub threshold_method: ThresholdMethod,
    pub n_reference: usize,
    pub n_test: usize,
    pub dim: usize,
    pub p_hat: f64,
    pub warnings: Vec<Warning>,
}

/// Everything computed for one scan direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionRun {
    pub direction: Direction,
    pub null_model: NullModel,
    /// Initial scores of the scanned sample, in id order.
    pub scores: Vec<ScoreRecord>,
    /// Injection scores of the opposite sample, in id order.
    pub injection_scores: Option<Vec<f64>>,
    /// Opposite-sample ids whose injection score reaches the threshold.
    pub injected: Vec<usize>,
    pub partition: PartitionResult,
    pub report: AnomalyReport,
    pub ide_iterations: usize,
    pub ide_rescored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub config: EagleEyeConfig,
    pub provenance: Provenance,
    /// Test direction first, then reference direction.
    pub directions: [DirectionRun; 2],
}

impl PipelineRun {
    pub fn direction(&self, d: Direction) -> &DirectionRun {
        match d {
            Direction::TestOverdensity => &self.directions[0],
            Direction::ReferenceOverdensity => &self.directions[1],
        }
    }

    pub fn report(&self, d: Direction) -> &AnomalyReport {
        &self.direction(d).report
    }

    pub fn partition(&self, d: Direction) -> &PartitionResult {
        &self.direction(d).partition
    }
}

/// Runs the full pipeline with the default density-peaks clusterer.
pub fn run(reference: &Dataset, test: &Dataset, config: &EagleEyeConfig) -> Result<PipelineRun> {
    run_with_clusterer(
        reference,
        test,
        config,
        &DensityPeaks::new(config.clustering.clone()),
    )
}

struct Scan {
    table: UpsilonTable,
    null_model: NullModel,
    scores: Vec<ScoreRecord>,
    injection: Option<Vec<f64>>,
}

pub fn run_with_clusterer(
    reference: &Dataset,
    test: &Dataset,
    config: &EagleEyeConfig,
    clusterer: &dyn Clusterer,
) -> Result<PipelineRun> {
    let validated = validate(reference, test, config).map_err(|mut errs| {
        if errs.len() == 1 {
            errs.remove(0)
        } else {
            Error::Validation(errs)
        }
    })?;
    let index = build_union_index(reference, test)?;

    let mut scans = Vec::with_capacity(2);
    for d in Direction::BOTH {
        let table = UpsilonTable::new(config.k_max, scan_probability(&index, d))?;
        let null_model = null_threshold_with_table(
            &table,
            config.p_ext,
            config.threshold_method,
            config.seed,
            config.n_null_sequences,
        )?;
        scans.push(Scan {
            table,
            null_model,
            scores: Vec::new(),
            injection: None,
        });
    }
    score_pass(&index, &mut scans, config.run_injection)?;

    let mut equalized = Vec::with_capacity(2);
    for (d, scan) in Direction::BOTH.into_iter().zip(&scans) {
        let eq = ide::equalize(&index, d, &scan.table, scan.null_model.threshold, &scan.scores)?;
        let partition = ide::partition(&index, d, scan.null_model.threshold, &scan.scores, &eq);
        equalized.push((eq, partition));
    }

    let mut directions = Vec::with_capacity(2);
    for (i, (d, scan)) in Direction::BOTH.into_iter().zip(scans).enumerate() {
        let (own, other) = (&equalized[i].1, &equalized[1 - i].1);
        let (scanned, opposite) = match d.scanned() {
            Role::Test => (test, reference),
            Role::Reference => (reference, test),
        };
        let threshold = scan.null_model.threshold;
        let injected = scan
            .injection
            .as_deref()
            .map(|s| injection::select(s, threshold))
            .unwrap_or_default();
        let weights = Reweighting {
            n_own: scanned.len(),
            pruned_own: own.pruned.len(),
            n_other: opposite.len(),
            pruned_other: other.pruned.len(),
        };
        let report = build_report(
            d,
            own,
            &scan.scores,
            scanned,
            opposite,
            scan.injection.as_deref(),
            &injected,
            weights,
            config.q,
            clusterer,
        )?;
        let eq = &equalized[i].0;
        directions.push(DirectionRun {
            direction: d,
            null_model: scan.null_model,
            scores: scan.scores,
            injection_scores: scan.injection,
            injected,
            partition: own.clone(),
            report,
            ide_iterations: eq.iterations,
            ide_rescored: eq.rescored,
        });
    }
    let directions: [DirectionRun; 2] = directions
        .try_into()
        .unwrap_or_else(|_| unreachable!("two scan directions"));
    Ok(PipelineRun {
        config: config.clone(),
        provenance: Provenance {
            seed: config.seed,
            threshold_method: config.threshold_method,
            n_reference: validated.n_reference,
            n_test: validated.n_test,
            dim: validated.dim,
            p_hat: validated.p_hat,
            warnings: validated.warnings,
        },
        directions,
    })
}

/// One neighbour query per pooled point yields its own score and, with
/// injection on, its score as a member of the other sample.
fn score_pass(index: &UnionIndex, scans: &mut [Scan], inject: bool) -> Result<()> {
    let k_max = scans[0].table.k_max();
    let slot = |role: Role| match role {
        Role::Test => 0,
        Role::Reference => 1,
    };
    let per_point: Vec<(ScoreRecord, f64)> = (0..index.len())
        .into_par_iter()
        .map(|u| {
            let nn = index.knn(index.point(u), k_max, Some(u), None)?;
            let (role, id) = index.origin(u);
            let membership = index.labels_of(&nn, role);
            let (upsilon, k_star) = scans[slot(role)].table.score(&membership);
            let injected = if inject {
                let as_other = MembershipBits::from_bools(membership.iter().map(|b| !b));
                scans[slot(role.other())].table.score(&as_other).0
            } else {
                f64::NAN
            };
            Ok((
                ScoreRecord {
                    point_id: id,
                    upsilon,
                    k_star,
                    membership,
                },
                injected,
            ))
        })
        .collect::<Result<_>>()?;

    let n_ref = index.n_reference();
    let mut per_point = per_point.into_iter();
    let (ref_part, test_part): (Vec<_>, Vec<_>) =
        (per_point.by_ref().take(n_ref).collect(), per_point.collect());
    for (role, part) in [(Role::Reference, ref_part), (Role::Test, test_part)] {
        let (records, inj): (Vec<ScoreRecord>, Vec<f64>) = part.into_iter().unzip();
        scans[slot(role)].scores = records;
        if inject {
            scans[slot(role.other())].injection = Some(inj);
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    direction: Direction,
    partition: &PartitionResult,
    scores: &[ScoreRecord],
    scanned: &Dataset,
    opposite: &Dataset,
    injection_scores: Option<&[f64]>,
    injected: &[usize],
    weights: Reweighting,
    q: f64,
    clusterer: &dyn Clusterer,
) -> Result<AnomalyReport> {
    let flagged = &partition.flagged;
    if flagged.is_empty() {
        return Ok(AnomalyReport {
            direction,
            clusters: Vec::new(),
            dropped_clusters: Vec::new(),
            noise: Vec::new(),
            totals: ReportTotals {
                members: 0,
                injected: 0,
                estimates: weights.estimates(0, injection_scores.map(|_| 0)),
            },
        });
    }
    let coords: Vec<f64> = flagged
        .iter()
        .flat_map(|&id| scanned.point(id).iter().copied())
        .collect();
    let labels = clusterer.cluster(&coords, scanned.dim())?;
    let rec = repechage(flagged, &labels, &partition.pruned, |id| scores[id].upsilon, q);

    let mut thresholds = vec![None; labels.n_clusters()];
    for c in &rec.clusters {
        thresholds[c.alpha] = Some(c.threshold);
    }
    let per_alpha = injection_scores.map(|inj| {
        assign_injected(injected, opposite, |i| inj[i], flagged, scanned, &labels, &thresholds)
    });

    let mut clusters = Vec::with_capacity(rec.clusters.len());
    for c in rec.clusters {
        let injected = per_alpha
            .as_ref()
            .map(|p| p[c.alpha].clone())
            .unwrap_or_default();
        let estimates = weights.estimates(
            c.members.len(),
            per_alpha.as_ref().map(|_| injected.len()),
        );
        clusters.push(ClusterAnomaly {
            alpha: c.alpha,
            flagged: c.flagged,
            pruned_count: c.pruned_count,
            repechage_threshold: c.threshold,
            members: c.members,
            injected,
            estimates,
        });
    }
    let members: usize = clusters.iter().map(|c| c.members.len()).sum();
    let inj_total: usize = clusters.iter().map(|c| c.injected.len()).sum();
    Ok(AnomalyReport {
        direction,
        totals: ReportTotals {
            members,
            injected: inj_total,
            estimates: weights.estimates(members, per_alpha.as_ref().map(|_| inj_total)),
        },
        clusters,
        dropped_clusters: rec.dropped,
        noise: rec.noise,
    })
}
