//! Right-tail binomial probabilities in log space.

use crate::error::{Error, Result};
use crate::model::MembershipBits;

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!(
            "success probability must lie in (0, 1), got {p}"
        )))
    }
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Log-probability of each outcome `0..=k` of `Binomial(k, p)`.
fn log_pmf_row(k: usize, ln_p: f64, ln_q: f64, out: &mut Vec<f64>) {
    out.clear();
    let mut ln_c = 0.0;
    for j in 0..=k {
        out.push(ln_c + j as f64 * ln_p + (k - j) as f64 * ln_q);
        if j < k {
            ln_c += ((k - j) as f64).ln() - ((j + 1) as f64).ln();
        }
    }
}

/// `ln P[Binomial(k, p) ≥ b]`.
pub fn log_binomial_tail(b: usize, k: usize, p: f64) -> Result<f64> {
    check_p(p)?;
    if b > k {
        return Err(Error::DomainError(format!(
            "observed count {b} exceeds the number of trials {k}"
        )));
    }
    if b == 0 {
        return Ok(0.0);
    }
    let mut terms = Vec::with_capacity(k + 1);
    log_pmf_row(k, p.ln(), (-p).ln_1p(), &mut terms);
    let tail = &terms[b..];
    let m = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = tail.iter().map(|t| (t - m).exp()).sum();
    Ok((m + s.ln()).min(0.0))
}

/// `P[Binomial(k, p) ≥ b]`, the right-tail p-value including the observed count.
///
/// ```
/// let p = eagleeye::binomial_tail_pvalue(4, 5, 0.5).unwrap();
/// assert!((p - 0.1875).abs() < 1e-15);
/// ```
pub fn binomial_tail_pvalue(b: usize, k: usize, p: f64) -> Result<f64> {
    log_binomial_tail(b, k, p).map(f64::exp)
}

/// Precomputed scores `-ln P[B_K ≥ b]` for every `1 ≤ K ≤ k_max`, `0 ≤ b ≤ K`.
///
/// Rows are non-decreasing in `b` and start at exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct UpsilonTable {
    k_max: usize,
    p_success: f64,
    values: Vec<f64>,
}

impl UpsilonTable {
    pub fn new(k_max: usize, p_success: f64) -> Result<Self> {
        check_p(p_success)?;
        if k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be positive".into()));
        }
        let (ln_p, ln_q) = (p_success.ln(), (-p_success).ln_1p());
        let mut values = Vec::with_capacity(k_max * (k_max + 3) / 2);
        let mut pmf = Vec::with_capacity(k_max + 1);
        let mut row = vec![0.0; k_max + 1];
        for k in 1..=k_max {
            log_pmf_row(k, ln_p, ln_q, &mut pmf);
            let mut acc = f64::NEG_INFINITY;
            for b in (0..=k).rev() {
                acc = log_add_exp(acc, pmf[b]);
                row[b] = (-acc).max(0.0);
            }
            row[0] = 0.0;
            values.extend_from_slice(&row[..=k]);
        }
        Ok(UpsilonTable {
            k_max,
            p_success,
            values,
        })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn p_success(&self) -> f64 {
        self.p_success
    }

    #[inline]
    fn offset(k: usize) -> usize {
        (k - 1) * (k + 2) / 2
    }

    /// Scores for rank `k`, indexed by the count `b`.
    #[inline]
    pub fn row(&self, k: usize) -> &[f64] {
        let o = Self::offset(k);
        &self.values[o..o + k + 1]
    }

    #[inline]
    pub fn get(&self, k: usize, b: usize) -> f64 {
        self.values[Self::offset(k) + b]
    }

    /// Every stored score, row after row.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Maximum profile value and the smallest rank attaining it.
    ///
    /// Profile values that are mathematically equal can differ in the last
    /// bits, so the rank is the first one within `1e-12` relative of the
    /// maximum.
    pub fn score(&self, bits: &MembershipBits) -> (f64, usize) {
        let len = bits.len().min(self.k_max);
        let mut best = f64::NEG_INFINITY;
        let mut count = 0;
        for k in 1..=len {
            count += bits.get(k - 1) as usize;
            best = best.max(self.get(k, count));
        }
        let floor = best - best.abs() * 1e-12;
        count = 0;
        for k in 1..=len {
            count += bits.get(k - 1) as usize;
            if self.get(k, count) >= floor {
                return (best, k);
            }
        }
        (best, 1)
    }

    /// Full profile `Υ(K)` for `K = 1..=len`.
    pub fn profile(&self, bits: &MembershipBits) -> Vec<f64> {
        let mut count = 0;
        bits.iter()
            .take(self.k_max)
            .enumerate()
            .map(|(i, bit)| {
                count += bit as usize;
                self.get(i + 1, count)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_values() {
        assert_eq!(binomial_tail_pvalue(0, 10, 0.5).unwrap(), 1.0);
        let p = binomial_tail_pvalue(10, 10, 0.5).unwrap();
        assert!((p - 1.0 / 1024.0).abs() < 1e-15);
        let p = binomial_tail_pvalue(4, 5, 0.5).unwrap();
        assert!((p / 0.1875 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(log_binomial_tail(11, 10, 0.5), Err(Error::DomainError(_))));
        assert!(log_binomial_tail(1, 10, 0.0).is_err());
        assert!(log_binomial_tail(1, 10, 1.0).is_err());
        assert!(UpsilonTable::new(5, f64::NAN).is_err());
    }

    #[test]
    fn table_agrees_with_direct_tail() {
        for p in [0.5, 0.3, 0.9] {
            let t = UpsilonTable::new(60, p).unwrap();
            for k in 1..=60 {
                assert_eq!(t.get(k, 0), 0.0);
                for b in 0..=k {
                    let direct = -log_binomial_tail(b, k, p).unwrap();
                    assert!((t.get(k, b) - direct).abs() <= 1e-11 * direct.max(1.0));
                }
                assert!(t.row(k).windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }

    #[test]
    fn profile_maxima_pick_the_first_rank() {
        let t = UpsilonTable::new(10, 0.5).unwrap();
        let ones = MembershipBits::from_bools([true; 10]);
        let (u, k) = t.score(&ones);
        assert!((u - 10.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(k, 10);
        let alt = MembershipBits::from_bools((0..10).map(|i| i % 2 == 0));
        let (u, k) = t.score(&alt);
        assert!((u - 2f64.ln()).abs() < 1e-12);
        assert_eq!(k, 1);
    }
}
