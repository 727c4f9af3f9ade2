//! Small statistics toolkit: exact Binomial intervals, empirical CDFs and
//! the Kolmogorov-Smirnov distance.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

/// Exact (Clopper-Pearson) two-sided interval for a Binomial proportion.
pub fn clopper_pearson(failures: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && failures <= trials);
    let alpha = 1.0 - confidence;
    let k = failures as f64;
    let n = trials as f64;
    let low = if failures == 0 {
        0.0
    } else {
        beta_quantile(k, n - k + 1.0, alpha / 2.0)
    };
    let high = if failures == trials {
        1.0
    } else {
        beta_quantile(k + 1.0, n - k, 1.0 - alpha / 2.0)
    };
    (low, high)
}

/// Beta(a, b) quantile by bisection on the regularized incomplete beta
/// function, accurate in relative terms down to tiny quantiles.
fn beta_quantile(a: f64, b: f64, level: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..400 {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if lo > 0.0 && hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    hi
}

/// Sorted sample with CDF and quantile queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(|a, b| a.total_cmp(b));
        Self { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples <= x.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// Fraction of samples > x.
    pub fn ccdf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Empirical quantile (lower interpolation-free order statistic).
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.sorted[idx]
    }

    /// Kolmogorov-Smirnov distance to a continuous reference CDF.
    pub fn ks_distance(&self, reference: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = reference(x);
                let above = (i + 1) as f64 / n - f;
                let below = f - i as f64 / n;
                above.max(below)
            })
            .fold(0.0, f64::max)
    }

    /// CDF evaluated on `points` evenly spaced quantile levels, as
    /// (value, probability) rows.
    pub fn table(&self, points: usize) -> Vec<(f64, f64)> {
        let n = self.sorted.len();
        if n == 0 {
            return Vec::new();
        }
        let points = points.clamp(2, n);
        (0..points)
            .map(|k| {
                let idx = k * (n - 1) / (points - 1);
                (self.sorted[idx], (idx + 1) as f64 / n as f64)
            })
            .collect()
    }
}

/// Ordinary least-squares slope and intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_failure_interval_is_exact() {
        for &n in &[10u64, 1000, 1_000_000] {
            let (lo, hi) = clopper_pearson(0, n, 0.95);
            assert_eq!(lo, 0.0);
            let want = 1.0 - 0.025f64.powf(1.0 / n as f64);
            assert!((hi - want).abs() < 1e-9 * want.max(1e-12) + 1e-15, "{hi} vs {want}");
        }
    }

    #[test]
    fn interval_contains_estimate() {
        for &(k, n) in &[(1u64, 10u64), (5, 100), (50, 100), (99, 100), (100, 100)] {
            let (lo, hi) = clopper_pearson(k, n, 0.95);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi);
        }
    }

    #[test]
    fn ks_of_uniform_grid_is_small() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let cdf = EmpiricalCdf::new(xs);
        assert!(cdf.ks_distance(|x| x.clamp(0.0, 1.0)) <= 0.0005 + 1e-12);
        assert_eq!(cdf.cdf(0.5), 0.5);
        assert!((cdf.quantile(0.99) - 0.9895).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (m, c) = linear_fit(&x, &y);
        assert!((m - 2.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
    }
}
