//! Two-sample Kolmogorov–Smirnov and Cramér–von Mises tests with
//! asymptotic p-values. Both statistics handle tied observations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleResult {
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
    pub cvm_statistic: f64,
    pub cvm_pvalue: f64,
}

pub fn two_sample_tests(a: &[f64], b: &[f64]) -> Result<TwoSampleResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);

    let d = ks_statistic(&xs, &ys);
    let en = (n * m / (n + m)).sqrt();
    let ks_pvalue = kolmogorov_sf((en + 0.12 + 0.11 / en) * d);

    let t = cvm_statistic(&xs, &ys);
    // Standardise T to the mean and variance of the one-sample limit.
    let (k, big_n) = (n * m, n + m);
    let mean = (1.0 + 1.0 / big_n) / 6.0;
    let var = (big_n + 1.0) * (4.0 * k * big_n - 3.0 * (n * n + m * m) - 2.0 * k)
        / (45.0 * big_n * big_n * 4.0 * k);
    let tn = 1.0 / 6.0 + (t - mean) / (45.0 * var).sqrt();
    let cvm_pvalue = if tn < 0.003 {
        1.0
    } else {
        (1.0 - cvm_limit_cdf(tn)).clamp(0.0, 1.0)
    };
    Ok(TwoSampleResult {
        ks_statistic: d,
        ks_pvalue,
        cvm_statistic: t,
        cvm_pvalue,
    })
}

/// Largest gap between the two empirical CDFs, evaluated after each
/// distinct value so tied observations move both CDFs together.
fn ks_statistic(xs: &[f64], ys: &[f64]) -> f64 {
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = if xs[i].total_cmp(&ys[j]).is_le() { xs[i] } else { ys[j] };
        while i < xs.len() && xs[i] == v {
            i += 1;
        }
        while j < ys.len() && ys[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series, fast for small arguments.
        let c = -PI * PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|j| {
                let o = (2 * j - 1) as f64;
                (c * o * o).exp()
            })
            .sum();
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 1..=100 {
            let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-18 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Mid-rank of every observation in the pooled sorted sample.
fn pooled_ranks(xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pooled: Vec<(f64, bool)> = xs
        .iter()
        .map(|&v| (v, false))
        .chain(ys.iter().map(|&v| (v, true)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rx = Vec::with_capacity(xs.len());
    let mut ry = Vec::with_capacity(ys.len());
    let mut start = 0;
    while start < pooled.len() {
        let mut end = start + 1;
        while end < pooled.len() && pooled[end].0 == pooled[start].0 {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &(_, in_y) in &pooled[start..end] {
            if in_y {
                ry.push(rank);
            } else {
                rx.push(rank);
            }
        }
        start = end;
    }
    (rx, ry)
}

/// Anderson's two-sample statistic `T`.
fn cvm_statistic(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = pooled_ranks(xs, ys);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let big_n = n + m;
    let dev = |ranks: &[f64]| -> f64 {
        ranks
            .iter()
            .enumerate()
            .map(|(i, r)| (r - (i + 1) as f64).powi(2))
            .sum()
    };
    let u = n * dev(&rx) + m * dev(&ry);
    u / (n * m * big_n) - (4.0 * n * m - 1.0) / (6.0 * big_n)
}

/// `exp(-q) K_{1/4}(q)` by trapezoidal quadrature of the integral
/// representation, which converges geometrically for this integrand.
fn scaled_bessel_k_quarter(q: f64) -> f64 {
    let upper = (1.0 + 60.0 / q).acosh();
    let steps = 2000;
    let h = upper / steps as f64;
    let f = |t: f64| (-q * (t.cosh() - 1.0)).exp() * (0.25 * t).cosh();
    let inner: f64 = (1..steps).map(|i| f(i as f64 * h)).sum();
    let integral = h * (0.5 * f(0.0) + inner + 0.5 * f(upper));
    (-2.0 * q).exp() * integral
}

/// Limiting CDF of the Cramér–von Mises statistic.
pub fn cvm_limit_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    // Γ(k + 1/2) / Γ(k + 1), starting at √π.
    let mut ratio = PI.sqrt();
    for k in 0..200 {
        let y = (4 * k + 1) as f64;
        let q = y * y / (16.0 * x);
        let u = ratio / (PI.powf(1.5) * x.sqrt());
        let term = u * y.sqrt() * scaled_bessel_k_quarter(q);
        total += term;
        if term.abs() < 1e-12 {
            break;
        }
        ratio *= (k as f64 + 0.5) / (k as f64 + 1.0);
    }
    total
}
