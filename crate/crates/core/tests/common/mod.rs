//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use eagleeye::scoring::UpsilonTable;
use eagleeye::{Dataset, Direction, MembershipBits, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force neighbours ordered by (distance, union id).
pub fn knn(pool: &[Vec<f64>], active: &[bool], q: usize, k: usize) -> Vec<usize> {
    let mut c: Vec<(f64, usize)> = (0..pool.len())
        .filter(|&v| v != q && active[v])
        .map(|v| {
            let d: f64 = pool[q].iter().zip(&pool[v]).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, v)
        })
        .collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    c.truncate(k);
    c.into_iter().map(|(_, v)| v).collect()
}

/// Returns the removed scanned ids, sorted.
pub fn naive_ide(
    reference: &Dataset,
    test: &Dataset,
    direction: Direction,
    threshold: f64,
    k_max: usize,
) -> Vec<usize> {
    let n_ref = reference.len();
    let pool: Vec<Vec<f64>> = reference.points().chain(test.points()).map(<[f64]>::to_vec).collect();
    let is_scanned = |u: usize| (u >= n_ref) == (direction.scanned() == Role::Test);
    let n_scanned = (0..pool.len()).filter(|&u| is_scanned(u)).count();
    let table = UpsilonTable::new(k_max, n_scanned as f64 / pool.len() as f64).unwrap();
    let mut active = vec![true; pool.len()];
    let mut removed = Vec::new();
    loop {
        let mut best: Option<(f64, usize, Vec<usize>)> = None;
        for u in (0..pool.len()).filter(|&u| is_scanned(u) && active[u]) {
            let nn = knn(&pool, &active, u, k_max);
            let bits = MembershipBits::from_bools(nn.iter().map(|&v| is_scanned(v)));
            let (s, _) = table.score(&bits);
            if s >= threshold && best.as_ref().is_none_or(|b| s > b.0) {
                best = Some((s, u, nn));
            }
        }
        let Some((_, top, nn)) = best else { break };
        for v in std::iter::once(top).chain(nn.into_iter().take_while(|&v| is_scanned(v))) {
            active[v] = false;
            removed.push(if v >= n_ref { v - n_ref } else { v });
        }
    }
    removed.sort_unstable();
    removed
}

pub fn instance(seed: u64, dim: usize) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ref = 140 + rng.random_range(0..20);
    let n_test = 300 - n_ref;
    let blob: Vec<f64> = (0..dim).map(|_| rng.random_range(0.2..0.8)).collect();
    let reference: Vec<f64> = (0..n_ref * dim).map(|_| rng.random::<f64>()).collect();
    let mut test = Vec::with_capacity(n_test * dim);
    for i in 0..n_test {
        for c in &blob {
            test.push(if i < 40 {
                c + 0.05 * (rng.random::<f64>() - 0.5)
            } else {
                rng.random::<f64>()
            });
        }
    }
    // A few exact duplicates exercise the id tie-break.
    test[..dim].copy_from_slice(&reference[..dim]);
    (
        Dataset::new(Role::Reference, dim, reference).unwrap(),
        Dataset::new(Role::Test, dim, test).unwrap(),
    )
}


/// Indices of the `k` nearest rows of `pool` to `q`, by full sort.
pub fn sorted_knn(pool: &[f64], dim: usize, q: &[f64], k: usize, exclude: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = pool
        .chunks_exact(dim)
        .enumerate()
        .filter(|&(i, _)| i != exclude)
        .map(|(i, p)| (p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, i)| i).collect()
}
