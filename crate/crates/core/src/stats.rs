//! Zero-correlation tests, BCa intervals, Benjamini-Hochberg and small
//! statistical helpers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Left,
    Right,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub tail: Tail,
    pub n: usize,
}

impl TestReport {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Standard normal CDF, accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// Studentized test of zero correlation: `T = sqrt(n) r / tau` with
/// `tau² = mean((x-x̄)²(y-ȳ)²) / (s_x² s_y²)`, referred to N(0, 1).
pub fn test_zero_corr(x: &[f64], y: &[f64], tail: Tail) -> Result<TestReport> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::Shape(format!("vectors of length {n} and {}", y.len())));
    }
    if n < 8 {
        return Err(Error::DegenerateInput(format!(
            "zero-correlation test needs n >= 8, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy, mut s22) = (0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
        s22 += da * da * db * db;
    }
    let (vx, vy) = (sxx / nf, syy / nf);
    // Treat variance at round-off level relative to the data scale as zero.
    let scale_x = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let scale_y = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tiny = |v: f64, s: f64| v <= (1e-13 * s).powi(2);
    if tiny(vx, scale_x) || tiny(vy, scale_y) {
        return Err(Error::DegenerateInput("zero-variance input to correlation test".into()));
    }
    let r = sxy / (sxx * syy).sqrt();
    let tau2 = (s22 / nf) / (vx * vy);
    if tau2 <= 0.0 || !tau2.is_finite() {
        return Err(Error::DegenerateInput("degenerate studentization".into()));
    }
    let t = nf.sqrt() * r / tau2.sqrt();
    let p = match tail {
        Tail::Right => normal_sf(t),
        Tail::Left => normal_cdf(t),
        Tail::Two => (2.0 * normal_sf(t.abs())).min(1.0),
    };
    Ok(TestReport {
        statistic: t,
        p_value: p.clamp(0.0, 1.0),
        tail,
        n,
    })
}

/// Type-7 quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    /// False when the percentile fallback was used.
    pub accelerated: bool,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Bias-corrected and accelerated bootstrap interval at `confidence`.
/// Falls back to the percentile interval when the bias correction is
/// infinite or the jackknife has no spread.
pub fn bca_interval(estimate: f64, boot: &[f64], jackknife: &[f64], confidence: f64) -> Interval {
    let mut sorted: Vec<f64> = boot.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail = (1.0 - confidence) / 2.0;
    let percentile = |accelerated| Interval {
        lower: quantile_sorted(&sorted, tail),
        upper: quantile_sorted(&sorted, 1.0 - tail),
        accelerated,
    };
    let b = sorted.len() as f64;
    let below = sorted.iter().filter(|&&v| v < estimate).count() as f64;
    let z0 = normal_quantile(below / b);
    let m = jackknife.len() as f64;
    let jbar = jackknife.iter().sum::<f64>() / m;
    let (mut s2, mut s3) = (0.0, 0.0);
    for &j in jackknife {
        let d = jbar - j;
        s2 += d * d;
        s3 += d * d * d;
    }
    if !z0.is_finite() || s2 <= 0.0 {
        return percentile(false);
    }
    let a = s3 / (6.0 * s2.powf(1.5));
    let adjust = |z: f64| {
        let num = z0 + z;
        normal_cdf(z0 + num / (1.0 - a * num))
    };
    let lo = adjust(normal_quantile(tail));
    let hi = adjust(normal_quantile(1.0 - tail));
    if !lo.is_finite() || !hi.is_finite() {
        return percentile(false);
    }
    Interval {
        lower: quantile_sorted(&sorted, lo),
        upper: quantile_sorted(&sorted, hi),
        accelerated: true,
    }
}

/// Benjamini-Hochberg step-up procedure; returns which hypotheses are
/// discoveries at FDR level `q`.
pub fn benjamini_hochberg(p_values: &[f64], q: f64) -> Vec<bool> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).unwrap());
    let mut cutoff = None;
    for (rank, &i) in order.iter().enumerate() {
        if p_values[i] <= q * (rank + 1) as f64 / m as f64 {
            cutoff = Some(rank);
        }
    }
    let mut out = vec![false; m];
    if let Some(c) = cutoff {
        for &i in &order[..=c] {
            out[i] = true;
        }
    }
    out
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919) % 301) as f64 / 37.0).collect()
    }

    #[test]
    fn perfect_correlation() {
        let x = seq(300);
        let r = test_zero_corr(&x, &x, Tail::Two).unwrap();
        assert!(r.p_value < 1e-10);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = test_zero_corr(&x, &neg, Tail::Right).unwrap();
        assert!(r.p_value > 1.0 - 1e-10);
    }

    #[test]
    fn degenerate_inputs() {
        let x = seq(20);
        assert_eq!(test_zero_corr(&x, &[1.0; 20], Tail::Two).unwrap_err().kind(), "DegenerateInput");
        assert_eq!(test_zero_corr(&x[..5], &x[..5], Tail::Two).unwrap_err().kind(), "DegenerateInput");
    }

    #[test]
    fn bh_step_up() {
        let p = [0.01, 0.04, 0.03, 0.2];
        // thresholds 0.0125, 0.025, 0.0375, 0.05 on sorted p (0.01, 0.03, 0.04, 0.2)
        assert_eq!(benjamini_hochberg(&p, 0.05), vec![true, false, false, false]);
        assert_eq!(benjamini_hochberg(&[0.01, 0.02], 0.05), vec![true, true]);
    }

    #[test]
    fn normal_tails() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-11);
        assert!((normal_sf(3.0) + normal_cdf(3.0) - 1.0).abs() < 1e-15);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-9);
    }

    #[test]
    fn bca_without_spread_is_percentile() {
        let boot: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let iv = bca_interval(50.0, &boot, &[1.0; 10], 0.9);
        assert!(!iv.accelerated);
        assert!((iv.lower - 4.95).abs() < 1e-12);
    }
}
