//! Domain types shared by every stage of the pipeline.
//!
//! Coordinates are used exactly as given. Features on very different scales
//! should be normalised by the caller before building a [`Dataset`], since
//! the neighbour search applies the metric to raw coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusteringParams;
use crate::error::{Error, Result};

/// Which of the two samples a dataset plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Reference,
    Test,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Reference => Role::Test,
            Role::Test => Role::Reference,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Reference => "reference",
            Role::Test => "test",
        })
    }
}

/// An ordered collection of `d`-dimensional points. Point ids are the row
/// positions `0..len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    role: Role,
    dim: usize,
    coords: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from row-major coordinates.
    pub fn new(role: Role, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::MalformedDataset {
                role,
                message: "points must have at least one coordinate".into(),
            });
        }
        if coords.len() % dim != 0 {
            return Err(Error::MalformedDataset {
                role,
                message: format!(
                    "{} coordinates cannot be split into rows of {dim}",
                    coords.len()
                ),
            });
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteInput {
                role,
                id: pos / dim,
                coordinate: pos % dim,
            });
        }
        Ok(Dataset { role, dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(role: Role, rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::EmptyDataset { role });
        };
        let dim = first.as_ref().len();
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (id, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::MalformedDataset {
                    role,
                    message: format!("point {id} has {} coordinates, expected {dim}", row.len()),
                });
            }
            coords.extend_from_slice(row);
        }
        Dataset::new(role, dim, coords)
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Same points under a different role.
    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMethod {
    /// Exact boundary-crossing dynamic program.
    #[default]
    ExactDp,
    /// Empirical quantile over simulated Bernoulli sequences.
    MonteCarlo,
}

/// All pipeline hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EagleEyeConfig {
    /// Largest neighbourhood rank scanned per point.
    pub k_max: usize,
    /// Null probability of a point exceeding the critical threshold.
    pub p_ext: f64,
    /// Lower quantile of pruned scores used as the per-cluster recovery threshold.
    pub q: f64,
    pub metric: Metric,
    pub seed: u64,
    /// Number of simulated sequences for the Monte-Carlo threshold.
    pub n_null_sequences: usize,
    pub threshold_method: ThresholdMethod,
    pub run_injection: bool,
    pub clustering: ClusteringParams,
}

impl Default for EagleEyeConfig {
    fn default() -> Self {
        EagleEyeConfig {
            k_max: 500,
            p_ext: 1e-5,
            q: 0.01,
            metric: Metric::Euclidean,
            seed: 0,
            n_null_sequences: 1_000_000,
            threshold_method: ThresholdMethod::ExactDp,
            run_injection: true,
            clustering: ClusteringParams::default(),
        }
    }
}

impl EagleEyeConfig {
    pub fn with_k_max(k_max: usize) -> Self {
        EagleEyeConfig {
            k_max,
            ..Default::default()
        }
    }

    /// Checks parameter ranges that do not depend on the data.
    pub fn check(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be positive".into()));
        }
        if !(self.p_ext > 0.0 && self.p_ext < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "p_ext must lie in (0, 1), got {}",
                self.p_ext
            )));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidConfig(format!(
                "q must lie in [0, 1], got {}",
                self.q
            )));
        }
        if self.n_null_sequences == 0 {
            return Err(Error::InvalidConfig(
                "n_null_sequences must be positive".into(),
            ));
        }
        self.clustering.check()
    }
}

/// Non-fatal observations made while validating inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Warning {
    /// `k_max` exceeds 5% of the pooled sample size, where the binomial
    /// model of neighbour labels stops being a good approximation of the
    /// hypergeometric draw.
    KMaxAboveFivePercent { k_max: usize, limit: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::KMaxAboveFivePercent { k_max, limit } => write!(
                f,
                "k_max = {k_max} exceeds 5% of the pooled sample ({limit}); binomial null may be inaccurate"
            ),
        }
    }
}

/// Result of a successful [`validate`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedInput {
    pub n_reference: usize,
    pub n_test: usize,
    pub dim: usize,
    /// Success probability of a neighbour label under the null, `n_test / (n_reference + n_test)`.
    pub p_hat: f64,
    pub warnings: Vec<Warning>,
}

impl ValidatedInput {
    pub fn n_total(&self) -> usize {
        self.n_reference + self.n_test
    }

    /// Null probability that a neighbour belongs to the scanned set.
    pub fn p_success(&self, direction: Direction) -> f64 {
        let n = self.n_total() as f64;
        match direction {
            Direction::TestOverdensity => self.n_test as f64 / n,
            Direction::ReferenceOverdensity => self.n_reference as f64 / n,
        }
    }
}

/// Checks that the two samples and the configuration can be combined.
/// Every violation found is reported, not just the first.
pub fn validate(
    reference: &Dataset,
    test: &Dataset,
    config: &EagleEyeConfig,
) -> std::result::Result<ValidatedInput, Vec<Error>> {
    let mut violations = Vec::new();
    if let Err(e) = config.check() {
        violations.push(e);
    }
    for ds in [reference, test] {
        if ds.is_empty() {
            violations.push(Error::EmptyDataset { role: ds.role() });
        }
        if let Some(pos) = ds.coords().iter().position(|c| !c.is_finite()) {
            violations.push(Error::NonFiniteInput {
                role: ds.role(),
                id: pos / ds.dim(),
                coordinate: pos % ds.dim(),
            });
        }
    }
    if reference.dim() != test.dim() {
        violations.push(Error::DimensionMismatch {
            reference: reference.dim(),
            test: test.dim(),
        });
    }
    let n_total = reference.len() + test.len();
    if config.k_max >= n_total {
        violations.push(Error::KMaxTooLarge {
            k_max: config.k_max,
            available: n_total.saturating_sub(1),
        });
    }
    if !violations.is_empty() {
        return Err(violations);
    }
    let mut warnings = Vec::new();
    let limit = n_total / 20;
    if config.k_max > limit {
        warnings.push(Warning::KMaxAboveFivePercent {
            k_max: config.k_max,
            limit,
        });
    }
    Ok(ValidatedInput {
        n_reference: reference.len(),
        n_test: test.len(),
        dim: reference.dim(),
        p_hat: test.len() as f64 / n_total as f64,
        warnings,
    })
}

/// Scan direction: which sample is searched for over-densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Test points with too many test neighbours.
    TestOverdensity,
    /// Reference points with too many reference neighbours (test under-densities).
    ReferenceOverdensity,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::TestOverdensity, Direction::ReferenceOverdensity];

    pub fn scanned(self) -> Role {
        match self {
            Direction::TestOverdensity => Role::Test,
            Direction::ReferenceOverdensity => Role::Reference,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::TestOverdensity => Direction::ReferenceOverdensity,
            Direction::ReferenceOverdensity => Direction::TestOverdensity,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::TestOverdensity => "test-overdensity",
            Direction::ReferenceOverdensity => "reference-overdensity",
        })
    }
}

/// Packed neighbour-membership sequence: bit `k` is set when the `(k+1)`-th
/// nearest neighbour belongs to the scanned set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MembershipBits {
    len: usize,
    words: Vec<u64>,
}

impl MembershipBits {
    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut out = MembershipBits::default();
        for b in bits {
            out.push(b);
        }
        out
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        if bit {
            self.words[self.len / 64] |= 1 << (self.len % 64);
        }
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, k: usize) -> bool {
        assert!(k < self.len, "membership index {k} out of range {}", self.len);
        self.words[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.len).map(|k| self.get(k))
    }

    /// Cumulative counts `B(K)` for `K = 1..=len`.
    pub fn cumulative_counts(&self) -> Vec<u32> {
        self.iter()
            .scan(0u32, |acc, b| {
                *acc += b as u32;
                Some(*acc)
            })
            .collect()
    }
}

/// Anomaly score of one scanned point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRecord {
    /// Id of the point within its own dataset.
    pub point_id: usize,
    /// Maximum over ranks of the negative natural-log binomial tail p-value.
    pub upsilon: f64,
    /// Smallest rank attaining `upsilon`.
    pub k_star: usize,
    pub membership: MembershipBits,
}

impl ScoreRecord {
    /// `B(i, K)` for `K = 1..=k_max`.
    pub fn b_counts(&self) -> Vec<u32> {
        self.membership.cumulative_counts()
    }
}

/// Split of one scanned set into flagged, pruned and equalised parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub direction: Direction,
    pub threshold: f64,
    /// Points whose initial score reaches the threshold, ascending ids.
    pub flagged: Vec<usize>,
    /// Points removed by density equalisation, ascending ids.
    pub pruned: Vec<usize>,
    /// Points left after density equalisation, ascending ids.
    pub equalized: Vec<usize>,
}

impl PartitionResult {
    /// Pruned points whose own initial score was below the threshold.
    pub fn pruned_not_flagged(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut fl = self.flagged.iter().peekable();
        for &p in &self.pruned {
            while fl.next_if(|&&f| f < p).is_some() {}
            if fl.peek() != Some(&&p) {
                out.push(p);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QualityFlag {
    /// Estimated background exceeds the number of recovered points.
    NegativePurity,
    /// No injected point fell in this anomaly; significance is undefined.
    NoBackgroundEstimate,
    /// Background injection was disabled for this run.
    InjectionDisabled,
}

/// Estimates for one anomaly (or the union of all anomalies).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimates {
    pub purity: Option<f64>,
    pub s_over_sqrt_b: Option<f64>,
    pub quality: Vec<QualityFlag>,
}

/// One recovered anomaly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAnomaly {
    pub alpha: usize,
    /// Flagged points carrying this cluster label.
    pub flagged: Vec<usize>,
    /// How many of `flagged` were removed by density equalisation.
    pub pruned_count: usize,
    /// Per-cluster recovery threshold.
    pub repechage_threshold: f64,
    /// Recovered anomaly members, ascending ids.
    pub members: Vec<usize>,
    /// Ids (in the opposite dataset) of injected points attributed to this anomaly.
    pub injected: Vec<usize>,
    pub estimates: Estimates,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportTotals {
    pub members: usize,
    pub injected: usize,
    pub estimates: Estimates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub direction: Direction,
    pub clusters: Vec<ClusterAnomaly>,
    /// Cluster labels with no density-equalisation representative.
    pub dropped_clusters: Vec<usize>,
    /// Flagged points the clusterer labelled as noise.
    pub noise: Vec<usize>,
    pub totals: ReportTotals,
}

impl AnomalyReport {
    pub fn all_members(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .clusters
            .iter()
            .flat_map(|c| c.members.iter().copied())
            .collect();
        all.sort_unstable();
        all
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(role: Role, n: usize, dim: usize) -> Dataset {
        let coords = (0..n * dim).map(|i| (i as f64 * 0.37).sin()).collect();
        Dataset::new(role, dim, coords).unwrap()
    }

    #[test]
    fn equal_sizes_give_even_odds() {
        let v = validate(
            &cube(Role::Reference, 100, 3),
            &cube(Role::Test, 100, 3),
            &EagleEyeConfig::with_k_max(10),
        )
        .unwrap();
        assert_eq!(v.p_hat, 0.5);
        assert_eq!(v.p_hat, 1.0 - v.p_hat);
        assert!(v.warnings.is_empty());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let errs = validate(
            &cube(Role::Reference, 100, 3),
            &cube(Role::Test, 50, 2),
            &EagleEyeConfig::with_k_max(10),
        )
        .unwrap_err();
        assert!(matches!(errs[..], [Error::DimensionMismatch { reference: 3, test: 2 }]));
    }

    #[test]
    fn one_percent_rank_does_not_warn() {
        let v = validate(
            &cube(Role::Reference, 50_000, 1),
            &cube(Role::Test, 50_000, 1),
            &EagleEyeConfig::with_k_max(500),
        )
        .unwrap();
        assert!(v.warnings.is_empty());
    }

    #[test]
    fn large_rank_warns_then_fails() {
        let (r, t) = (cube(Role::Reference, 100, 2), cube(Role::Test, 100, 2));
        let v = validate(&r, &t, &EagleEyeConfig::with_k_max(11)).unwrap();
        assert_eq!(
            v.warnings,
            vec![Warning::KMaxAboveFivePercent { k_max: 11, limit: 10 }]
        );
        let errs = validate(&r, &t, &EagleEyeConfig::with_k_max(200)).unwrap_err();
        assert!(matches!(errs[..], [Error::KMaxTooLarge { k_max: 200, .. }]));
    }

    #[test]
    fn several_violations_are_collected() {
        let r = cube(Role::Reference, 3, 2);
        let t = cube(Role::Test, 3, 4);
        let errs = validate(&r, &t, &EagleEyeConfig::with_k_max(10)).unwrap_err();
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn non_finite_coordinates_are_rejected() {
        let err = Dataset::new(Role::Test, 2, vec![0.0, 1.0, f64::NAN, 2.0]).unwrap_err();
        assert!(matches!(
            err,
            Error::NonFiniteInput { role: Role::Test, id: 1, coordinate: 0 }
        ));
    }

    #[test]
    fn validation_is_repeatable() {
        let (r, t) = (cube(Role::Reference, 40, 2), cube(Role::Test, 60, 2));
        let c = EagleEyeConfig::with_k_max(4);
        let first = validate(&r, &t, &c).unwrap();
        assert_eq!(first, validate(&r, &t, &c).unwrap());
        assert_eq!(first.p_hat, 0.6);
    }

    #[test]
    fn membership_bits_accumulate() {
        let bits = MembershipBits::from_bools((0..130).map(|k| k % 3 == 0));
        let counts = bits.cumulative_counts();
        assert_eq!(counts.len(), 130);
        assert_eq!(counts[0], 1);
        assert_eq!(counts[2], 1);
        assert_eq!(counts[3], 2);
        assert_eq!(*counts.last().unwrap(), 44);
        assert!(counts.windows(2).all(|w| w[1] - w[0] <= 1));
    }

    #[test]
    fn pruned_not_flagged_is_a_set_difference() {
        let p = PartitionResult {
            direction: Direction::TestOverdensity,
            threshold: 1.0,
            flagged: vec![1, 4, 7],
            pruned: vec![1, 2, 7, 9],
            equalized: vec![0, 3, 4, 5, 6, 8],
        };
        assert_eq!(p.pruned_not_flagged(), vec![2, 9]);
    }
}
