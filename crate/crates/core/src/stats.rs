//! Small statistics helpers: Wilson intervals, ECDFs and quantiles.

use serde::{Deserialize, Serialize};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval at 95% for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lower = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let upper = if p == 1.0 { 1.0 } else { (center + half).min(1.0) };
    (lower, upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub successes: usize,
    pub n: usize,
}

impl ProportionEstimate {
    pub fn new(successes: usize, n: usize) -> Self {
        let (lower, upper) = wilson_interval(successes, n);
        let estimate = if n == 0 { 0.0 } else { successes as f64 / n as f64 };
        Self { estimate, lower, upper, successes, n }
    }
}

/// Right-continuous empirical CDF of event times over `n` units; units
/// without an event are censored and never counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    times: Vec<f64>,
    n: usize,
}

impl Ecdf {
    pub fn new(mut times: Vec<f64>, n: usize) -> Self {
        times.sort_by(f64::total_cmp);
        assert!(times.len() <= n, "more events than units");
        Self { times, n }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let k = self.times.partition_point(|&x| x <= t);
        k as f64 / self.n as f64
    }

    pub fn survival(&self, t: f64) -> f64 {
        1.0 - self.eval(t)
    }

    pub fn event_times(&self) -> &[f64] {
        &self.times
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Mean and standard error (sample standard deviation over √n).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.037).abs() < 0.001, "{hi}");
        let e = ProportionEstimate::new(100, 100);
        assert_eq!(e.estimate, 1.0);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        assert!(((hi - lo) / 2.0 - 0.098).abs() < 0.002);
    }

    #[test]
    fn wilson_matches_direct_quadratic_solution() {
        // The interval endpoints solve (p̂ - p)² = z² p(1-p)/n.
        for (k, n) in [(3usize, 17usize), (10, 10), (1, 1000)] {
            let (lo, hi) = wilson_interval(k, n);
            let ph = k as f64 / n as f64;
            for p in [lo, hi] {
                if p > 0.0 && p < 1.0 {
                    let lhs = (ph - p).powi(2);
                    let rhs = Z95 * Z95 * p * (1.0 - p) / n as f64;
                    assert!((lhs - rhs).abs() < 1e-12, "{k}/{n}");
                }
            }
        }
    }

    #[test]
    fn ecdf_basics() {
        let e = Ecdf::new(vec![], 10);
        assert_eq!(e.eval(100.0), 0.0);
        let e = Ecdf::new(vec![2.0, 1.0, 2.0], 4);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(1.0), 0.25);
        assert_eq!(e.eval(2.0), 0.75);
        assert_eq!(e.survival(2.0), 0.25);
    }

    #[test]
    fn quantile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
    }

    proptest! {
        #[test]
        fn ecdf_is_monotone_and_bounded(times in proptest::collection::vec(0.0f64..10.0, 0..50), extra in 0usize..10, probes in proptest::collection::vec(-1.0f64..11.0, 1..30)) {
            let n = times.len() + extra;
            let e = Ecdf::new(times, n);
            let mut ps = probes;
            ps.sort_by(f64::total_cmp);
            let vals: Vec<f64> = ps.iter().map(|&t| e.eval(t)).collect();
            prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
