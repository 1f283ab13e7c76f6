//! Exact neighbour queries over the pooled sample.
//!
//! Union ids place the reference block first (`0..n_reference`) followed by
//! the test block. Distance ties are broken by ascending union id, so every
//! query has a single well-defined answer regardless of backend or thread
//! count.

mod kdtree;

pub use kdtree::{brute_force_knn, squared_distance, Candidate, KdTree};

use crate::error::{Error, Result};
use crate::model::{Dataset, MembershipBits, Role};

/// Above this dimension a tree rarely prunes and a linear scan wins.
const BRUTE_FORCE_MIN_DIM: usize = 17;
/// Below this size building a tree is not worth it.
const BRUTE_FORCE_MAX_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchBackend {
    #[default]
    Auto,
    KdTree,
    BruteForce,
}

/// Visibility mask over union ids, used to hide removed points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    mask: Vec<bool>,
    count: usize,
}

impl ActiveSet {
    pub fn all(n: usize) -> Self {
        ActiveSet {
            mask: vec![true; n],
            count: n,
        }
    }

    #[inline]
    pub fn contains(&self, union_id: usize) -> bool {
        self.mask[union_id]
    }

    /// Hides a point; returns whether it was visible.
    pub fn remove(&mut self, union_id: usize) -> bool {
        let was = std::mem::replace(&mut self.mask[union_id], false);
        self.count -= was as usize;
        was
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub union_id: usize,
    pub dist2: f64,
}

/// Spatial index over reference and test points together.
#[derive(Debug, Clone)]
pub struct UnionIndex {
    dim: usize,
    n_reference: usize,
    coords: Vec<f64>,
    tree: Option<KdTree>,
}

/// Builds the pooled index with the default backend choice.
pub fn build_union_index(reference: &Dataset, test: &Dataset) -> Result<UnionIndex> {
    UnionIndex::with_backend(reference, test, SearchBackend::Auto)
}

impl UnionIndex {
    pub fn with_backend(reference: &Dataset, test: &Dataset, backend: SearchBackend) -> Result<Self> {
        if reference.dim() != test.dim() {
            return Err(Error::DimensionMismatch {
                reference: reference.dim(),
                test: test.dim(),
            });
        }
        let dim = reference.dim();
        let mut coords = Vec::with_capacity(reference.coords().len() + test.coords().len());
        coords.extend_from_slice(reference.coords());
        coords.extend_from_slice(test.coords());
        let n = coords.len() / dim;
        let use_tree = match backend {
            SearchBackend::KdTree => true,
            SearchBackend::BruteForce => false,
            SearchBackend::Auto => dim < BRUTE_FORCE_MIN_DIM && n > BRUTE_FORCE_MAX_POINTS,
        };
        let tree = use_tree.then(|| KdTree::build(&coords, dim));
        Ok(UnionIndex {
            dim,
            n_reference: reference.len(),
            coords,
            tree,
        })
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

    pub fn n_reference(&self) -> usize {
        self.n_reference
    }

    pub fn n_test(&self) -> usize {
        self.len() - self.n_reference
    }

    pub fn uses_tree(&self) -> bool {
        self.tree.is_some()
    }

    #[inline]
    pub fn label(&self, union_id: usize) -> Role {
        if union_id < self.n_reference {
            Role::Reference
        } else {
            Role::Test
        }
    }

    /// Role and dataset-local id of a union point.
    pub fn origin(&self, union_id: usize) -> (Role, usize) {
        match self.label(union_id) {
            Role::Reference => (Role::Reference, union_id),
            Role::Test => (Role::Test, union_id - self.n_reference),
        }
    }

    pub fn union_id(&self, role: Role, id: usize) -> usize {
        match role {
            Role::Reference => id,
            Role::Test => self.n_reference + id,
        }
    }

    /// Union ids of one role's block.
    pub fn block(&self, role: Role) -> std::ops::Range<usize> {
        match role {
            Role::Reference => 0..self.n_reference,
            Role::Test => self.n_reference..self.len(),
        }
    }

    pub fn point(&self, union_id: usize) -> &[f64] {
        &self.coords[union_id * self.dim..(union_id + 1) * self.dim]
    }

    /// The `k` nearest visible points to `query`, closest first, skipping
    /// `exclude` and anything hidden by `active`.
    pub fn knn(
        &self,
        query: &[f64],
        k: usize,
        exclude: Option<usize>,
        active: Option<&ActiveSet>,
    ) -> Result<Vec<Neighbor>> {
        let visible = active.map_or(self.len(), ActiveSet::count);
        let excluded_visible = exclude
            .filter(|&e| e < self.len() && active.is_none_or(|a| a.contains(e)))
            .is_some();
        let available = visible - excluded_visible as usize;
        if k > available {
            return Err(Error::KMaxTooLarge {
                k_max: k,
                available,
            });
        }
        let exclude = exclude.map_or(u32::MAX, |e| e as u32);
        let accept = |id: u32| id != exclude && active.is_none_or(|a| a.contains(id as usize));
        let found = match &self.tree {
            Some(tree) => tree.knn(query, k, accept),
            None => brute_force_knn(&self.coords, self.dim, query, k, accept),
        };
        Ok(found
            .into_iter()
            .map(|c| Neighbor {
                union_id: c.id as usize,
                dist2: c.dist2,
            })
            .collect())
    }

    /// Bit `k` is set when the `(k+1)`-th neighbour carries `query_label`.
    pub fn membership_sequence(
        &self,
        query: &[f64],
        exclude: Option<usize>,
        k_max: usize,
        query_label: Role,
    ) -> Result<MembershipBits> {
        let nn = self.knn(query, k_max, exclude, None)?;
        Ok(self.labels_of(&nn, query_label))
    }

    pub(crate) fn labels_of(&self, neighbors: &[Neighbor], label: Role) -> MembershipBits {
        MembershipBits::from_bools(neighbors.iter().map(|n| self.label(n.union_id) == label))
    }

    pub(crate) fn labels_of_ids(&self, ids: &[usize], label: Role) -> MembershipBits {
        MembershipBits::from_bools(ids.iter().map(|&u| self.label(u) == label))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(role: Role, rows: &[[f64; 2]]) -> Dataset {
        Dataset::from_rows(role, rows).unwrap()
    }

    #[test]
    fn two_point_union() {
        let idx = build_union_index(
            &ds(Role::Reference, &[[0.0, 0.0]]),
            &ds(Role::Test, &[[1.0, 0.0]]),
        )
        .unwrap();
        assert_eq!(idx.len(), 2);
        assert_eq!(idx.label(0), Role::Reference);
        assert_eq!(idx.label(1), Role::Test);
        assert_eq!(idx.origin(1), (Role::Test, 0));
    }

    #[test]
    fn small_sequence_by_hand() {
        let r = ds(Role::Reference, &[[2.0, 0.0], [10.0, 0.0]]);
        let t = ds(Role::Test, &[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        let idx = build_union_index(&r, &t).unwrap();
        let q = idx.union_id(Role::Test, 0);
        let b = idx
            .membership_sequence(idx.point(q), Some(q), 3, Role::Test)
            .unwrap();
        // Test, reference, test.
        assert_eq!(b.iter().collect::<Vec<_>>(), [true, false, true]);
        let b = idx
            .membership_sequence(&[1.0, 0.0], Some(3), 3, Role::Test)
            .unwrap();
        // Neighbours of (1,0): (0,0) test and (2,0) reference tie at 1, then (3,0) test.
        assert_eq!(b.iter().collect::<Vec<_>>(), [false, true, true]);
    }

    #[test]
    fn duplicates_resolve_by_union_id() {
        let rows: Vec<[f64; 2]> = (0..100).map(|i| [i as f64, (i * i) as f64]).collect();
        let r = ds(Role::Reference, &rows);
        let t = ds(Role::Test, &rows);
        let idx = build_union_index(&r, &t).unwrap();
        for i in 0..100 {
            let u = idx.union_id(Role::Test, i);
            let nn = idx.knn(idx.point(u), 1, Some(u), None).unwrap();
            assert_eq!(nn[0].union_id, i);
            assert_eq!(nn[0].dist2, 0.0);
        }
    }

    #[test]
    fn masking_and_capacity() {
        let r = ds(Role::Reference, &[[0.0, 0.0], [1.0, 0.0]]);
        let t = ds(Role::Test, &[[2.0, 0.0]]);
        let idx = build_union_index(&r, &t).unwrap();
        assert!(idx.knn(&[0.0, 0.0], 2, Some(0), None).is_ok());
        assert!(matches!(
            idx.knn(&[0.0, 0.0], 3, Some(0), None),
            Err(Error::KMaxTooLarge { k_max: 3, available: 2 })
        ));
        let mut active = ActiveSet::all(3);
        assert!(active.remove(1));
        assert!(!active.remove(1));
        let nn = idx.knn(&[0.0, 0.0], 1, Some(0), Some(&active)).unwrap();
        assert_eq!(nn[0].union_id, 2);
        assert!(idx.knn(&[0.0, 0.0], 2, Some(0), Some(&active)).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let r = ds(Role::Reference, &[[0.0, 0.0]]);
        let t = Dataset::new(Role::Test, 3, vec![0.0; 3]).unwrap();
        assert!(matches!(
            build_union_index(&r, &t),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
