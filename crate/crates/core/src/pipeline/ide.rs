//! Iterative density equalisation.
//!
//! Removing scanned-sample points from a neighbourhood can only lower the
//! cumulative same-sample counts, so no score ever rises during the loop.
//! Only points that start above the threshold can be selected or need
//! rescoring, and each of them is rescored only when a point in its current
//! neighbour list is removed. The resulting partition is identical to
//! rescoring every visible point after every removal.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Dataset, Direction, EagleEyeConfig, PartitionResult, ScoreRecord};
use crate::neighbors::{build_union_index, ActiveSet, UnionIndex};
use crate::scoring::{scan_probability, score_with_table, UpsilonTable};

struct Candidate {
    upsilon: f64,
    /// Current neighbour list as union ids, closest first.
    neighbours: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalization {
    /// Removed union ids in removal order.
    pub removed: Vec<usize>,
    pub iterations: usize,
    /// Candidate rescoring operations performed.
    pub rescored: usize,
    pub active: ActiveSet,
}

/// Greedy removal from the scanned sample until every visible score is
/// below `threshold`. `initial` holds the unmasked scores of the whole
/// scanned sample in id order.
pub(crate) fn equalize(
    index: &UnionIndex,
    direction: Direction,
    table: &UpsilonTable,
    threshold: f64,
    initial: &[ScoreRecord],
) -> Result<Equalization> {
    let role = direction.scanned();
    let k_max = table.k_max();
    let mut active = ActiveSet::all(index.len());
    let limit = index.block(role).len();

    let start: Vec<usize> = initial
        .iter()
        .filter(|r| r.upsilon >= threshold)
        .map(|r| index.union_id(role, r.point_id))
        .collect();
    let lists = neighbour_lists(index, &start, k_max, &active)?;
    let mut candidates: Vec<Option<Candidate>> = Vec::new();
    candidates.resize_with(index.len(), || None);
    let mut watchers: Vec<Vec<u32>> = vec![Vec::new(); index.len()];
    let mut live: Vec<usize> = Vec::with_capacity(start.len());
    for (&u, neighbours) in start.iter().zip(lists) {
        for &v in &neighbours {
            watchers[v].push(u as u32);
        }
        let upsilon = initial[index.origin(u).1].upsilon;
        candidates[u] = Some(Candidate { upsilon, neighbours });
        live.push(u);
    }

    let mut removed = Vec::new();
    let mut iterations = 0;
    let mut rescored = 0;
    loop {
        live.retain(|&u| candidates[u].is_some());
        let Some(top) = live
            .iter()
            .copied()
            .max_by(|&a, &b| {
                let (sa, sb) = (score(&candidates, a), score(&candidates, b));
                sa.total_cmp(&sb).then(b.cmp(&a))
            })
        else {
            break;
        };
        if iterations == limit {
            return Err(Error::NonTermination { limit });
        }
        iterations += 1;

        let run: Vec<usize> = {
            let c = candidates[top].as_ref().expect("live candidate");
            std::iter::once(top)
                .chain(
                    c.neighbours
                        .iter()
                        .copied()
                        .take_while(|&v| index.label(v) == role),
                )
                .collect()
        };
        let mut affected = Vec::new();
        for &v in &run {
            active.remove(v);
            candidates[v] = None;
            removed.push(v);
            for &w in &watchers[v] {
                affected.push(w as usize);
            }
            watchers[v] = Vec::new();
        }
        affected.sort_unstable();
        affected.dedup();
        // Lists only ever lose removed points and gain farther ones, so a
        // watcher entry stays accurate until its candidate is dropped.
        affected.retain(|&u| candidates[u].is_some());

        let fresh = neighbour_lists(index, &affected, k_max, &active)?;
        rescored += affected.len();
        for (&u, neighbours) in affected.iter().zip(fresh) {
            let bits = index.labels_of_ids(&neighbours, role);
            let (upsilon, _) = table.score(&bits);
            if upsilon < threshold {
                candidates[u] = None;
                continue;
            }
            let c = candidates[u].as_mut().expect("affected candidate");
            let mut old = c.neighbours.clone();
            old.sort_unstable();
            for &v in &neighbours {
                if old.binary_search(&v).is_err() {
                    watchers[v].push(u as u32);
                }
            }
            c.upsilon = upsilon;
            c.neighbours = neighbours;
        }
    }
    Ok(Equalization {
        removed,
        iterations,
        rescored,
        active,
    })
}

fn score(candidates: &[Option<Candidate>], u: usize) -> f64 {
    candidates[u].as_ref().map_or(f64::NEG_INFINITY, |c| c.upsilon)
}

fn neighbour_lists(
    index: &UnionIndex,
    ids: &[usize],
    k: usize,
    active: &ActiveSet,
) -> Result<Vec<Vec<usize>>> {
    ids.par_iter()
        .map(|&u| {
            Ok(index
                .knn(index.point(u), k, Some(u), Some(active))?
                .into_iter()
                .map(|n| n.union_id)
                .collect())
        })
        .collect()
}

/// Splits the scanned sample into pruned and equalised ids.
pub(crate) fn partition(
    index: &UnionIndex,
    direction: Direction,
    threshold: f64,
    initial: &[ScoreRecord],
    eq: &Equalization,
) -> PartitionResult {
    let role = direction.scanned();
    let flagged = crate::pipeline::flag(initial, threshold);
    let mut pruned: Vec<usize> = eq.removed.iter().map(|&u| index.origin(u).1).collect();
    pruned.sort_unstable();
    let equalized = index
        .block(role)
        .filter(|&u| eq.active.contains(u))
        .map(|u| index.origin(u).1)
        .collect();
    PartitionResult {
        direction,
        threshold,
        flagged,
        pruned,
        equalized,
    }
}

/// Runs density equalisation from scratch for one direction.
pub fn ide_prune(
    reference: &Dataset,
    test: &Dataset,
    direction: Direction,
    threshold: f64,
    config: &EagleEyeConfig,
) -> Result<PartitionResult> {
    let index = build_union_index(reference, test)?;
    let table = UpsilonTable::new(config.k_max, scan_probability(&index, direction))?;
    let initial = score_with_table(&index, direction, &table, None)?;
    let eq = equalize(&index, direction, &table, threshold, &initial)?;
    Ok(partition(&index, direction, threshold, &initial, &eq))
}

/// Scores of the scanned sample after equalisation, rescored against the
/// equalised configuration.
pub fn rescore_equalized(
    reference: &Dataset,
    test: &Dataset,
    partition: &PartitionResult,
    config: &EagleEyeConfig,
) -> Result<Vec<ScoreRecord>> {
    let index = build_union_index(reference, test)?;
    let role = partition.direction.scanned();
    let mut active = ActiveSet::all(index.len());
    for &id in &partition.pruned {
        active.remove(index.union_id(role, id));
    }
    let table = UpsilonTable::new(config.k_max, scan_probability(&index, partition.direction))?;
    score_with_table(&index, partition.direction, &table, Some(&active))
}
