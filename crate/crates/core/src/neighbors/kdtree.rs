//! Exact k-nearest-neighbour kd-tree.
//!
//! Candidates are ordered by `(squared distance, id)`, so equal distances
//! resolve to the smaller id. Pruning never discards a subtree that could
//! hold an equally distant point, which keeps results identical to a brute
//! force scan under the same total order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub dist2: f64,
    pub id: u32,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Bounded max-heap holding the `k` best candidates seen so far.
pub struct KBest {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl KBest {
    pub fn new(k: usize) -> Self {
        KBest {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    pub fn offer(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if c < *worst {
                *worst = c;
            }
        }
    }

    /// Squared radius beyond which nothing can enter, or `None` while not full.
    #[inline]
    fn bound(&self) -> Option<f64> {
        if self.heap.len() < self.k {
            None
        } else {
            self.heap.peek().map(|c| c.dist2)
        }
    }

    pub fn into_sorted(self) -> Vec<Candidate> {
        self.heap.into_sorted_vec()
    }
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u32, value: f64, left: u32, right: u32 },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    /// Coordinates in tree order.
    points: Vec<f64>,
    /// Tree position to caller id.
    ids: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree {
    /// Builds a tree over row-major `coords`; ids are row positions.
    pub fn build(coords: &[f64], dim: usize) -> Self {
        let n = coords.len() / dim;
        assert!(n <= u32::MAX as usize, "kd-tree supports at most 2^32 points");
        let mut perm: Vec<u32> = (0..n as u32).collect();
        let mut tree = KdTree {
            dim,
            points: Vec::with_capacity(coords.len()),
            ids: Vec::with_capacity(n),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build_node(coords, &mut perm, 0);
        }
        for &id in &perm {
            let id = id as usize;
            tree.points
                .extend_from_slice(&coords[id * dim..(id + 1) * dim]);
        }
        tree.ids = perm;
        tree
    }

    fn build_node(&mut self, coords: &[f64], perm: &mut [u32], offset: usize) -> u32 {
        let slot = self.nodes.len() as u32;
        if perm.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                start: offset as u32,
                end: (offset + perm.len()) as u32,
            });
            return slot;
        }
        let dim = self.dim;
        let coord = |id: u32, axis: usize| coords[id as usize * dim + axis];

        let mut axis = 0;
        let mut widest = f64::NEG_INFINITY;
        for a in 0..dim {
            let (lo, hi) = perm.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &id| {
                let c = coord(id, a);
                (lo.min(c), hi.max(c))
            });
            if hi - lo > widest {
                widest = hi - lo;
                axis = a;
            }
        }
        let mid = perm.len() / 2;
        perm.select_nth_unstable_by(mid, |&a, &b| {
            coord(a, axis)
                .total_cmp(&coord(b, axis))
                .then(a.cmp(&b))
        });
        let value = coord(perm[mid], axis);

        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let (lo, hi) = perm.split_at_mut(mid);
        let left = self.build_node(coords, lo, offset);
        let right = self.build_node(coords, hi, offset + mid);
        self.nodes[slot as usize] = Node::Split {
            axis: axis as u32,
            value,
            left,
            right,
        };
        slot
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// The `k` nearest points accepted by `accept`, closest first.
    pub fn knn<F: Fn(u32) -> bool>(&self, query: &[f64], k: usize, accept: F) -> Vec<Candidate> {
        let mut best = KBest::new(k);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, query, &accept, &mut best);
        }
        best.into_sorted()
    }

    fn search<F: Fn(u32) -> bool>(&self, node: u32, query: &[f64], accept: &F, best: &mut KBest) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for pos in start as usize..end as usize {
                    let id = self.ids[pos];
                    if !accept(id) {
                        continue;
                    }
                    let p = &self.points[pos * self.dim..(pos + 1) * self.dim];
                    best.offer(Candidate {
                        dist2: squared_distance(query, p),
                        id,
                    });
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, accept, best);
                let plane = diff * diff;
                // `<=` keeps subtrees that may hold an equidistant point with a smaller id.
                if best.bound().is_none_or(|r| plane <= r) {
                    self.search(far, query, accept, best);
                }
            }
        }
    }
}

/// Brute-force counterpart of [`KdTree::knn`] over row-major coordinates.
pub fn brute_force_knn<F: Fn(u32) -> bool>(
    coords: &[f64],
    dim: usize,
    query: &[f64],
    k: usize,
    accept: F,
) -> Vec<Candidate> {
    let mut best = KBest::new(k);
    if k > 0 {
        for (id, p) in coords.chunks_exact(dim).enumerate() {
            let id = id as u32;
            if accept(id) {
                best.offer(Candidate {
                    dist2: squared_distance(query, p),
                    id,
                });
            }
        }
    }
    best.into_sorted()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * dim).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn matches_brute_force_on_random_cloud() {
        for dim in [1, 2, 3, 7] {
            let coords = cloud(2_000, dim, dim as u64);
            let tree = KdTree::build(&coords, dim);
            let queries = cloud(50, dim, 99);
            for q in queries.chunks_exact(dim) {
                let a = tree.knn(q, 40, |_| true);
                let b = brute_force_knn(&coords, dim, q, 40, |_| true);
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn ties_resolve_to_smaller_ids() {
        // Lattice with many equal distances from the origin.
        let mut coords = Vec::new();
        for x in -3..=3 {
            for y in -3..=3 {
                coords.extend([x as f64, y as f64]);
            }
        }
        let tree = KdTree::build(&coords, 2);
        let got = tree.knn(&[0.0, 0.0], 13, |_| true);
        let want = brute_force_knn(&coords, 2, &[0.0, 0.0], 13, |_| true);
        assert_eq!(got, want);
        let d: Vec<f64> = got.iter().map(|c| c.dist2).collect();
        assert_eq!(d, [0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 4.0, 4.0, 4.0, 4.0]);
        assert!(got[1..5].windows(2).all(|w| w[0].id < w[1].id));
    }

    #[test]
    fn duplicates_and_filtering() {
        let coords = vec![0.5; 2 * 20];
        let tree = KdTree::build(&coords, 2);
        let got = tree.knn(&[0.5, 0.5], 5, |id| id % 2 == 1);
        let ids: Vec<u32> = got.iter().map(|c| c.id).collect();
        assert_eq!(ids, [1, 3, 5, 7, 9]);
    }

    #[test]
    fn fewer_points_than_k() {
        let coords = cloud(5, 3, 1);
        let tree = KdTree::build(&coords, 3);
        assert_eq!(tree.knn(&[0.0; 3], 10, |_| true).len(), 5);
        let empty = KdTree::build(&[], 3);
        assert!(empty.knn(&[0.0; 3], 3, |_| true).is_empty());
    }

    #[test]
    fn degenerate_axis_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coords: Vec<f64> = (0..500)
            .flat_map(|_| [rng.random_range(0..3) as f64, 1.0])
            .collect();
        let tree = KdTree::build(&coords, 2);
        for q in [[0.0, 1.0], [1.4, 0.0], [2.0, 1.0]] {
            assert_eq!(
                tree.knn(&q, 200, |_| true),
                brute_force_knn(&coords, 2, &q, 200, |_| true)
            );
        }
    }
}
