//! Signal purity and significance from set cardinalities.
//!
//! Injected points of the opposite sample estimate the background inside an
//! anomaly. They are rescaled by the ratio of the two samples' sizes after
//! density equalisation, so for a test-direction anomaly the background is
//! `inj · (n_test − pruned_test) / (n_ref − pruned_ref)`. For the reference
//! direction the caller swaps the roles.

use crate::error::{Error, Result};
use crate::model::{Estimates, QualityFlag};

/// Background estimate `inj · (n_own − pruned_own) / (n_other − pruned_other)`.
pub fn background_estimate(
    inj_count: usize,
    n_own: usize,
    pruned_own: usize,
    n_other: usize,
    pruned_other: usize,
) -> Result<f64> {
    let denom = n_other.saturating_sub(pruned_other);
    if denom == 0 {
        return Err(Error::DivisionByZero);
    }
    let numer = n_own.saturating_sub(pruned_own);
    Ok(inj_count as f64 * numer as f64 / denom as f64)
}

/// Fraction of recovered points attributed to the anomaly rather than background.
///
/// ```
/// let p = eagleeye::pipeline::purity_estimate(62, 11, 50_000, 2_058, 50_000, 1_086).unwrap();
/// assert!((p - 0.826).abs() < 5e-4);
/// ```
pub fn purity_estimate(
    anom_count: usize,
    inj_count: usize,
    n_own: usize,
    pruned_own: usize,
    n_other: usize,
    pruned_other: usize,
) -> Result<f64> {
    if anom_count == 0 {
        return Err(Error::ZeroAnomaly);
    }
    let b = background_estimate(inj_count, n_own, pruned_own, n_other, pruned_other)?;
    let s = anom_count as f64;
    Ok((s - b) / s)
}

/// Estimated signal over the square root of estimated background.
pub fn s_over_sqrt_b_estimate(
    anom_count: usize,
    inj_count: usize,
    n_own: usize,
    pruned_own: usize,
    n_other: usize,
    pruned_other: usize,
) -> Result<f64> {
    let b = background_estimate(inj_count, n_own, pruned_own, n_other, pruned_other)?;
    if b <= 0.0 {
        return Err(Error::ZeroBackground);
    }
    Ok((anom_count as f64 - b) / b.sqrt())
}

/// Sample sizes entering the reweighting factor of one scan direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reweighting {
    pub n_own: usize,
    pub pruned_own: usize,
    pub n_other: usize,
    pub pruned_other: usize,
}

impl Reweighting {
    /// Estimates with quality flags; `injected` is `None` when injection was disabled.
    pub fn estimates(&self, anom_count: usize, injected: Option<usize>) -> Estimates {
        let Some(inj) = injected else {
            return Estimates {
                purity: None,
                s_over_sqrt_b: None,
                quality: vec![QualityFlag::InjectionDisabled],
            };
        };
        let mut quality = Vec::new();
        let purity = purity_estimate(
            anom_count,
            inj,
            self.n_own,
            self.pruned_own,
            self.n_other,
            self.pruned_other,
        )
        .ok();
        if purity.is_some_and(|p| p < 0.0) {
            quality.push(QualityFlag::NegativePurity);
        }
        let s_over_sqrt_b = s_over_sqrt_b_estimate(
            anom_count,
            inj,
            self.n_own,
            self.pruned_own,
            self.n_other,
            self.pruned_other,
        )
        .ok();
        if s_over_sqrt_b.is_none() {
            quality.push(QualityFlag::NoBackgroundEstimate);
        }
        Estimates {
            purity,
            s_over_sqrt_b,
            quality,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let p = purity_estimate(704, 5, 50_000, 1_086, 50_000, 2_058).unwrap();
        assert!((p - 0.993).abs() < 5e-4);
        assert_eq!(purity_estimate(10, 0, 100, 5, 100, 7).unwrap(), 1.0);
        let z = s_over_sqrt_b_estimate(100, 25, 10, 0, 10, 0).unwrap();
        assert!((z - 15.0).abs() < 1e-12);
        assert_eq!(s_over_sqrt_b_estimate(50, 50, 10, 0, 10, 0).unwrap(), 0.0);
        let z = s_over_sqrt_b_estimate(1_072, 211, 50_000, 2_058, 50_000, 1_086).unwrap();
        assert!((z - 60.2).abs() < 0.05);
    }

    #[test]
    fn error_cases() {
        assert!(matches!(purity_estimate(0, 1, 10, 0, 10, 0), Err(Error::ZeroAnomaly)));
        assert!(matches!(purity_estimate(3, 1, 10, 0, 10, 10), Err(Error::DivisionByZero)));
        assert!(matches!(
            s_over_sqrt_b_estimate(3, 0, 10, 0, 10, 0),
            Err(Error::ZeroBackground)
        ));
    }

    #[test]
    fn quality_flags() {
        let w = Reweighting {
            n_own: 100,
            pruned_own: 0,
            n_other: 100,
            pruned_other: 0,
        };
        let e = w.estimates(5, Some(9));
        assert_eq!(e.quality, vec![QualityFlag::NegativePurity]);
        assert!(e.purity.unwrap() < 0.0);
        let e = w.estimates(5, Some(0));
        assert_eq!(e.purity, Some(1.0));
        assert_eq!(e.quality, vec![QualityFlag::NoBackgroundEstimate]);
        assert_eq!(w.estimates(5, None).quality, vec![QualityFlag::InjectionDisabled]);
    }
}
