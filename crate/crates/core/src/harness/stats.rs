//! Interval estimates and hypothesis tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF, Normal};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_901;

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Standard error of a proportion estimate around `p` from `trials` draws.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test that two count vectors over the same categories come
/// from one distribution. Categories empty in both samples are dropped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> ChiSquareResult {
    assert_eq!(a.len(), b.len());
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let total = na + nb;
    let mut statistic = 0.0;
    let mut used = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        used += 1;
        for (obs, row) in [(x as f64, na), (y as f64, nb)] {
            let expected = row * col / total;
            statistic += (obs - expected).powi(2) / expected;
        }
    }
    let dof = used.saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).expect("positive dof").sf(statistic)
    };
    ChiSquareResult { statistic, dof, p_value }
}

/// Two-sided p-value of a pooled two-proportion z-test.
pub fn two_proportion_z_test(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return if p1 == p2 { 1.0 } else { 0.0 };
    }
    let z = (p1 - p2).abs() / se;
    2.0 * Normal::standard().sf(z)
}

/// Two-sided exact binomial test of `successes` out of `trials` against `p`.
pub fn binomial_test(successes: u64, trials: u64, p: f64) -> f64 {
    let dist = Binomial::new(p, trials).expect("valid binomial");
    let lower = dist.cdf(successes);
    let upper = if successes == 0 { 1.0 } else { dist.sf(successes - 1) };
    (2.0 * lower.min(upper)).min(1.0)
}

/// Total-variation distance between two empirical distributions.
pub fn total_variation(a: &[u64], b: &[u64]) -> f64 {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    0.5 * a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_point_estimate() {
        for (s, n) in [(0, 10), (10, 10), (7, 64), (500, 1000)] {
            let (lo, hi) = wilson_interval(s, n, Z_99);
            let p = s as f64 / n as f64;
            assert!(lo <= p && p <= hi && (0.0..=1.0).contains(&lo) && hi <= 1.0);
        }
        // textbook value: 50/100 at 95%
        let (lo, hi) = wilson_interval(50, 100, 1.959_963_984_540_054);
        assert!((lo - 0.403_831_7).abs() < 1e-6 && (hi - 0.596_168_3).abs() < 1e-6);
    }

    #[test]
    fn chi_square_identical_samples() {
        let r = chi_square_homogeneity(&[10, 20, 30, 0], &[10, 20, 30, 0]);
        assert_eq!(r.dof, 2);
        assert!(r.statistic.abs() < 1e-12 && (r.p_value - 1.0).abs() < 1e-12);
        let skew = chi_square_homogeneity(&[1000, 0], &[0, 1000]);
        assert!(skew.p_value < 1e-100);
    }

    #[test]
    fn two_proportion_cases() {
        assert!((two_proportion_z_test(50, 100, 50, 100) - 1.0).abs() < 1e-12);
        assert!(two_proportion_z_test(10, 1000, 500, 1000) < 1e-10);
    }

    #[test]
    fn binomial_test_symmetric() {
        assert!((binomial_test(5, 10, 0.5) - 1.0).abs() < 1e-12);
        // P[X <= 1] for Bin(10, 1/2) is 11/1024
        assert!((binomial_test(1, 10, 0.5) - 22.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn total_variation_bounds() {
        assert_eq!(total_variation(&[1, 1], &[2, 2]), 0.0);
        assert!((total_variation(&[1, 0], &[0, 1]) - 1.0).abs() < 1e-15);
    }
}
