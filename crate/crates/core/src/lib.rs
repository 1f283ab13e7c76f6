//! Local density anomaly detection between a reference and a test sample.
//!
//! Every point looks at its nearest neighbours in the pooled sample and asks
//! how surprising the number of same-sample neighbours is under a fair coin
//! with the pooled sample fractions as odds. Points whose neighbourhoods are
//! improbably one-sided are flagged, thinned by iterative density
//! equalisation, grouped into clusters and recovered per cluster. Background
//! contamination is estimated by scoring reference points as though they were
//! test points.
//!
//! ```
//! use eagleeye::{run, Dataset, EagleEyeConfig, Role};
//!
//! let grid = |role, n: usize| {
//!     let rows: Vec<[f64; 2]> = (0..n * n)
//!         .map(|i| [(i % n) as f64, (i / n) as f64])
//!         .collect();
//!     Dataset::from_rows(role, &rows).unwrap()
//! };
//! let reference = grid(Role::Reference, 20);
//! let test = grid(Role::Test, 20);
//! let config = EagleEyeConfig { k_max: 20, ..Default::default() };
//! let out = run(&reference, &test, &config).unwrap();
//! assert!(out.report(eagleeye::Direction::TestOverdensity).clusters.is_empty());
//! ```

pub mod clustering;
pub mod error;
pub mod io;
pub mod model;
pub mod neighbors;
pub mod pipeline;
pub mod scoring;
pub mod synthetic;

pub use clustering::{ClusterLabels, Clusterer, ClusteringParams, DensityPeaks};
pub use error::{Error, Result};
pub use model::{
    validate, AnomalyReport, ClusterAnomaly, Dataset, Direction, EagleEyeConfig, Estimates,
    MembershipBits, Metric, PartitionResult, QualityFlag, ReportTotals, Role, ScoreRecord,
    ThresholdMethod, ValidatedInput, Warning,
};
pub use neighbors::{build_union_index, ActiveSet, Neighbor, SearchBackend, UnionIndex};
pub use pipeline::{run, run_with_clusterer, DirectionRun, PipelineRun, Provenance};
pub use scoring::{
    binomial_tail_pvalue, null_threshold, score_all, two_sample_tests, upsilon_profile, NullModel,
    TwoSampleResult,
};
