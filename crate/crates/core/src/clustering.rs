//! Grouping of flagged points into anomaly candidates.
//!
//! [`DensityPeaks`] is a compact density-peaks clusterer:
//!
//! 1. density `ρ ∝ r_k^{-d}`, with `r_k` the distance to the `k`-th neighbour;
//! 2. each point links to its nearest neighbour of higher density, and points
//!    without one among their `k` neighbours become peaks;
//! 3. following links partitions the points into one cluster per peak;
//! 4. neighbouring clusters are merged in order of decreasing saddle density
//!    whenever `ρ_saddle > merge_ratio · ρ_lower_peak`, the merged cluster
//!    keeping the higher peak;
//! 5. clusters below `min_cluster_size` are relabelled as noise.
//!
//! Step 4 is persistence-based merging on log-density, so raising
//! `merge_ratio` can only split clusters, never join them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::KdTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringParams {
    /// Neighbour rank used for the density estimate.
    pub k_density: usize,
    /// Saddle-to-lower-peak density ratio above which clusters merge.
    pub merge_ratio: f64,
    pub min_cluster_size: usize,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        ClusteringParams {
            k_density: 20,
            merge_ratio: 0.6,
            min_cluster_size: 5,
        }
    }
}

impl ClusteringParams {
    pub fn check(&self) -> Result<()> {
        if self.k_density < 2 {
            return Err(Error::InvalidConfig(format!(
                "k_density must be at least 2, got {}",
                self.k_density
            )));
        }
        if !(self.merge_ratio > 0.0 && self.merge_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "merge_ratio must lie in (0, 1], got {}",
                self.merge_ratio
            )));
        }
        if self.min_cluster_size == 0 {
            return Err(Error::InvalidConfig("min_cluster_size must be positive".into()));
        }
        Ok(())
    }
}

/// Cluster label per input point; `None` marks noise.
///
/// Clusters are numbered by decreasing size, ties going to the cluster
/// holding the smaller point index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    labels: Vec<Option<usize>>,
    n_clusters: usize,
}

impl ClusterLabels {
    /// Renumbers arbitrary labels into the canonical order, turning clusters
    /// smaller than `min_size` into noise.
    pub fn from_raw(raw: &[Option<usize>], min_size: usize) -> Self {
        let top = raw.iter().flatten().max().map_or(0, |&m| m + 1);
        let mut size = vec![0usize; top];
        let mut first = vec![usize::MAX; top];
        for (i, l) in raw.iter().enumerate() {
            if let Some(l) = *l {
                size[l] += 1;
                first[l] = first[l].min(i);
            }
        }
        let mut kept: Vec<usize> = (0..top).filter(|&l| size[l] >= min_size.max(1)).collect();
        kept.sort_by_key(|&l| (std::cmp::Reverse(size[l]), first[l]));
        let mut rename = vec![None; top];
        for (alpha, &l) in kept.iter().enumerate() {
            rename[l] = Some(alpha);
        }
        ClusterLabels {
            labels: raw.iter().map(|l| l.and_then(|l| rename[l])).collect(),
            n_clusters: kept.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// Point indices of cluster `alpha`, ascending.
    pub fn members(&self, alpha: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == Some(alpha))
            .collect()
    }

    pub fn noise(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i].is_none())
            .collect()
    }
}

/// Extension point for alternative clustering algorithms.
pub trait Clusterer: Send + Sync {
    /// Labels the row-major `coords` (rows of length `dim`).
    fn cluster(&self, coords: &[f64], dim: usize) -> Result<ClusterLabels>;
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DensityPeaks {
    pub params: ClusteringParams,
}

impl DensityPeaks {
    pub fn new(params: ClusteringParams) -> Self {
        DensityPeaks { params }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl Clusterer for DensityPeaks {
    fn cluster(&self, coords: &[f64], dim: usize) -> Result<ClusterLabels> {
        self.params.check()?;
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let k = self.params.k_density.min(n - 1);
        if k == 0 {
            return Ok(ClusterLabels::from_raw(&[Some(0)], self.params.min_cluster_size));
        }

        let tree = KdTree::build(coords, dim);
        let neighbours: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let q = &coords[i * dim..(i + 1) * dim];
                tree.knn(q, k, |id| id as usize != i)
                    .into_iter()
                    .map(|c| c.id as usize)
                    .collect()
            })
            .collect();
        let radius: Vec<f64> = (0..n)
            .map(|i| {
                let j = neighbours[i][k - 1];
                crate::neighbors::squared_distance(
                    &coords[i * dim..(i + 1) * dim],
                    &coords[j * dim..(j + 1) * dim],
                )
                .sqrt()
            })
            .collect();

        // Position in density order: 0 is the densest point.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| radius[a].total_cmp(&radius[b]).then(a.cmp(&b)));
        let mut rank = vec![0; n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }

        let mut cluster = vec![usize::MAX; n];
        let mut peaks = Vec::new();
        for &i in &order {
            match neighbours[i].iter().find(|&&j| rank[j] < rank[i]) {
                Some(&j) => cluster[i] = cluster[j],
                None => {
                    cluster[i] = peaks.len();
                    peaks.push(i);
                }
            }
        }

        // Densest crossing edge per cluster pair, keyed by the sparser endpoint.
        let mut saddles: Vec<(usize, usize, usize)> = Vec::new();
        for i in 0..n {
            for &j in &neighbours[i] {
                let (a, b) = (cluster[i], cluster[j]);
                if a != b {
                    let s = if rank[i] > rank[j] { i } else { j };
                    saddles.push((rank[s], a.min(b), a.max(b)));
                }
            }
        }
        saddles.sort_unstable();

        let d = dim as f64;
        let mut parent: Vec<usize> = (0..peaks.len()).collect();
        // Union-find roots keep the densest peak of their component.
        let mut peak_of: Vec<usize> = peaks.clone();
        for &(saddle_rank, a, b) in &saddles {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                continue;
            }
            let (pa, pb) = (peak_of[ra], peak_of[rb]);
            let (high, low) = if rank[pa] < rank[pb] { (pa, pb) } else { (pb, pa) };
            let r_saddle = radius[order[saddle_rank]];
            let ratio = if r_saddle == 0.0 {
                1.0
            } else {
                (radius[low] / r_saddle).powf(d)
            };
            if ratio > self.params.merge_ratio {
                let (root, child) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent[child] = root;
                peak_of[root] = high;
            }
        }

        let raw: Vec<Option<usize>> = (0..n)
            .map(|i| Some(find(&mut parent, cluster[i])))
            .collect();
        Ok(ClusterLabels::from_raw(&raw, self.params.min_cluster_size))
    }
}

/// Clusters flagged points with the default density-peaks algorithm.
pub fn cluster_flagged(coords: &[f64], dim: usize, params: &ClusteringParams) -> Result<ClusterLabels> {
    DensityPeaks::new(params.clone()).cluster(coords, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn blob(center: [f64; 2], sd: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, sd).unwrap();
        (0..n)
            .flat_map(|_| [center[0] + g.sample(&mut rng), center[1] + g.sample(&mut rng)])
            .collect()
    }

    #[test]
    fn separated_blobs() {
        let mut coords = blob([0.0, 0.0], 0.05, 100, 1);
        coords.extend(blob([2.0, 0.0], 0.05, 100, 2));
        let labels = cluster_flagged(&coords, 2, &ClusteringParams::default()).unwrap();
        assert_eq!(labels.n_clusters(), 2);
        let first = labels.label(0);
        assert!((0..100).all(|i| labels.label(i) == first));
        assert!((100..200).all(|i| labels.label(i) != first && labels.label(i).is_some()));
    }

    #[test]
    fn single_blob_is_one_cluster() {
        let coords = blob([0.3, 0.3], 0.1, 300, 4);
        let labels = cluster_flagged(&coords, 2, &ClusteringParams::default()).unwrap();
        assert_eq!(labels.n_clusters(), 1);
    }

    #[test]
    fn tiny_input_is_noise() {
        let coords = [0.0, 0.0, 0.1, 0.0, 0.0, 0.1];
        let labels = cluster_flagged(&coords, 2, &ClusteringParams::default()).unwrap();
        assert_eq!(labels.n_clusters(), 0);
        assert_eq!(labels.noise(), vec![0, 1, 2]);
        let one = cluster_flagged(&[1.0], 1, &ClusteringParams::default()).unwrap();
        assert_eq!(one.noise(), vec![0]);
        assert!(matches!(
            cluster_flagged(&[], 2, &ClusteringParams::default()),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn canonical_numbering() {
        let labels = ClusterLabels::from_raw(&[Some(7), Some(3), Some(3), None, Some(7), Some(1)], 2);
        assert_eq!(labels.labels(), &[Some(0), Some(1), Some(1), None, Some(0), None]);
        assert_eq!(labels.n_clusters(), 2);
    }

    #[test]
    fn invalid_parameters() {
        let bad = ClusteringParams {
            k_density: 1,
            ..Default::default()
        };
        assert!(bad.check().is_err());
        let bad = ClusteringParams {
            merge_ratio: 0.0,
            ..Default::default()
        };
        assert!(bad.check().is_err());
    }
}
