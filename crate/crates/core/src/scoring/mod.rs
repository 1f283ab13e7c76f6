//! Binomial tail statistics, per-point scores and null thresholds.

mod binomial;
mod threshold;
pub mod two_sample;

pub use binomial::{binomial_tail_pvalue, log_binomial_tail, UpsilonTable};
pub use threshold::{crossing_probability, null_threshold, simulate_null_maxima, NullModel};
pub use two_sample::{two_sample_tests, TwoSampleResult};

pub(crate) use threshold::null_threshold_with_table;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Direction, EagleEyeConfig, MembershipBits, ScoreRecord};
use crate::neighbors::{ActiveSet, UnionIndex};

#[derive(Debug, Clone, PartialEq)]
pub struct UpsilonProfile {
    pub upsilon: f64,
    pub k_star: usize,
    /// `Υ(K)` for `K = 1..=len`.
    pub profile: Vec<f64>,
}

/// Score profile of one membership sequence.
///
/// ```
/// use eagleeye::{upsilon_profile, MembershipBits};
///
/// let head = MembershipBits::from_bools([true, true, true, false, false, false]);
/// let p = upsilon_profile(&head, 0.5).unwrap();
/// assert_eq!(p.k_star, 3);
/// assert!((p.upsilon - 8f64.ln()).abs() < 1e-12);
/// ```
pub fn upsilon_profile(bits: &MembershipBits, p_success: f64) -> Result<UpsilonProfile> {
    if bits.is_empty() {
        return Err(Error::DomainError("membership sequence is empty".into()));
    }
    let table = UpsilonTable::new(bits.len(), p_success)?;
    let (upsilon, k_star) = table.score(bits);
    Ok(UpsilonProfile {
        upsilon,
        k_star,
        profile: table.profile(bits),
    })
}

/// Null success probability of a scan, from the full (unmasked) sample sizes.
pub fn scan_probability(index: &UnionIndex, scan: Direction) -> f64 {
    let n = index.len() as f64;
    match scan {
        Direction::TestOverdensity => index.n_test() as f64 / n,
        Direction::ReferenceOverdensity => index.n_reference() as f64 / n,
    }
}

/// Scores every visible point of the scanned sample, in id order.
///
/// With `active`, hidden points are neither scored nor used as neighbours.
/// The success probability always comes from the full sample sizes.
pub fn score_all(
    index: &UnionIndex,
    scan: Direction,
    config: &EagleEyeConfig,
    active: Option<&ActiveSet>,
) -> Result<Vec<ScoreRecord>> {
    let table = UpsilonTable::new(config.k_max, scan_probability(index, scan))?;
    score_with_table(index, scan, &table, active)
}

pub(crate) fn score_with_table(
    index: &UnionIndex,
    scan: Direction,
    table: &UpsilonTable,
    active: Option<&ActiveSet>,
) -> Result<Vec<ScoreRecord>> {
    let role = scan.scanned();
    let ids: Vec<usize> = index
        .block(role)
        .filter(|&u| active.is_none_or(|a| a.contains(u)))
        .collect();
    ids.into_par_iter()
        .map(|u| {
            let nn = index.knn(index.point(u), table.k_max(), Some(u), active)?;
            let membership = index.labels_of(&nn, role);
            let (upsilon, k_star) = table.score(&membership);
            Ok(ScoreRecord {
                point_id: index.origin(u).1,
                upsilon,
                k_star,
                membership,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dataset, Role};
    use crate::neighbors::build_union_index;

    #[test]
    fn profile_examples() {
        let ones = MembershipBits::from_bools([true; 10]);
        let p = upsilon_profile(&ones, 0.5).unwrap();
        assert!((p.upsilon - 6.931471805599453).abs() < 1e-12);
        assert_eq!(p.k_star, 10);

        let alt = MembershipBits::from_bools((0..20).map(|i| i % 2 == 0));
        let p = upsilon_profile(&alt, 0.5).unwrap();
        assert!((p.upsilon - 2f64.ln()).abs() < 1e-12);
        assert_eq!(p.k_star, 1);
        assert!(upsilon_profile(&MembershipBits::default(), 0.5).is_err());
    }

    #[test]
    fn duplicated_samples_score_reproducibly() {
        let rows: Vec<[f64; 2]> = (0..60)
            .map(|i| [(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()])
            .collect();
        let r = Dataset::from_rows(Role::Reference, &rows).unwrap();
        let t = Dataset::from_rows(Role::Test, &rows).unwrap();
        let idx = build_union_index(&r, &t).unwrap();
        let cfg = EagleEyeConfig::with_k_max(10);
        let a = score_all(&idx, Direction::TestOverdensity, &cfg, None).unwrap();
        let b = score_all(&idx, Direction::TestOverdensity, &cfg, None).unwrap();
        assert_eq!(a, b);
        for rec in &a {
            // The zero-distance twin sits in the reference block and comes first.
            assert!(!rec.membership.get(0));
            assert!(rec.upsilon.is_finite() && rec.upsilon >= 0.0);
        }
    }
}
