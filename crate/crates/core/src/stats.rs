//! Hypothesis tests behind every flag decision of the protocol.

use serde::Serialize;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    /// `statistic <= threshold`.
    pub pass: bool,
    pub n: u64,
}

impl TestOutcome {
    fn new(statistic: f64, threshold: f64, n: u64) -> Self {
        Self { statistic, threshold, pass: statistic <= threshold, n }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn chi_square_quantile(df: usize, alpha: f64) -> f64 {
    ChiSquared::new(df as f64).expect("df >= 1").inverse_cdf(1.0 - alpha)
}

/// Pearson chi-square test against the uniform law on `counts.len()` cells.
pub fn uniform_test(counts: &[u64], alpha: f64) -> Result<TestOutcome> {
    if counts.len() < 2 {
        return Err(Error::InvalidParameter("uniform test needs at least two cells".into()));
    }
    let k = counts.len();
    goodness_of_fit(counts, &vec![1.0 / k as f64; k], alpha)
}

/// Pearson chi-square test against the cell probabilities `probs`.
///
/// Cells with zero probability and zero count are dropped; a count in a
/// zero-probability cell fails outright.
pub fn goodness_of_fit(counts: &[u64], probs: &[f64], alpha: f64) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    if counts.len() != probs.len() {
        return Err(Error::Dimension(format!("{} counts vs {} probabilities", counts.len(), probs.len())));
    }
    if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter("cell probabilities must be non-negative and sum to 1".into()));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::InvalidParameter("all counts are zero".into()));
    }
    let mut statistic = 0.0;
    let mut cells = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        if p == 0.0 {
            if c > 0 {
                statistic = f64::INFINITY;
            }
            continue;
        }
        cells += 1;
        let expected = n as f64 * p;
        statistic += (c as f64 - expected).powi(2) / expected;
    }
    if cells < 2 {
        return Err(Error::InvalidParameter("need at least two cells with positive probability".into()));
    }
    Ok(TestOutcome::new(statistic, chi_square_quantile(cells - 1, alpha), n))
}

/// One-sided binomial test that forbidden outcomes are not too frequent.
///
/// The tolerated rate is `max(predicted_rate, rate_floor)`; the test passes
/// iff `forbidden <= ` the `1 - alpha` quantile of `Binomial(n, rate)`.
pub fn forbidden_rate_test(
    forbidden: u64,
    n: u64,
    predicted_rate: f64,
    rate_floor: f64,
    alpha: f64,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::InvalidParameter("forbidden-rate test needs n > 0".into()));
    }
    if forbidden > n {
        return Err(Error::InvalidParameter(format!("{forbidden} forbidden outcomes out of {n}")));
    }
    let rate = predicted_rate.max(rate_floor);
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidParameter(format!("rate {rate} outside [0, 1]")));
    }
    let threshold = if rate == 0.0 {
        0
    } else {
        Binomial::new(rate, n).expect("rate in [0, 1]").inverse_cdf(1.0 - alpha)
    };
    Ok(TestOutcome::new(forbidden as f64, threshold as f64, n))
}

/// `1 - (3 p~)^2`.
pub fn eta(p_tilde: f64) -> Result<f64> {
    if !(0.0..=1.0 / 3.0).contains(&p_tilde) {
        return Err(Error::InvalidParameter(format!("p~ = {p_tilde} outside [0, 1/3]")));
    }
    Ok(1.0 - (3.0 * p_tilde).powi(2))
}

/// Wilson score interval for a binomial proportion at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_examples() {
        let t = uniform_test(&[100, 100, 100], 0.01).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!(t.pass);
        let t = uniform_test(&[1000, 0, 0], 0.01).unwrap();
        assert!((t.statistic - 2000.0).abs() < 1e-9);
        assert!(!t.pass);
        assert!(uniform_test(&[0, 0, 0], 0.01).is_err());
        assert!(uniform_test(&[3], 0.01).is_err());
    }

    #[test]
    fn chi_square_quantile_reference() {
        // Tabulated 99% points of chi-square with 1 and 2 degrees of freedom.
        assert!((chi_square_quantile(1, 0.01) - 6.634897).abs() < 1e-5);
        assert!((chi_square_quantile(2, 0.01) - 9.210340).abs() < 1e-5);
    }

    #[test]
    fn forbidden_examples() {
        assert!(forbidden_rate_test(0, 50, 0.0, 0.0, 0.01).unwrap().pass);
        let t = forbidden_rate_test(10, 10_000, 0.0, 1e-4, 0.01).unwrap();
        assert!(!t.pass);
        // Binomial(10^4, 10^-4) is close to Poisson(1): P(X >= 4) = 0.019, P(X >= 5) = 0.0037.
        assert_eq!(t.threshold, 4.0);
        assert!(forbidden_rate_test(1, 0, 0.1, 0.0, 0.01).is_err());
    }

    #[test]
    fn zero_probability_cell() {
        assert!(!goodness_of_fit(&[5, 5, 1], &[0.5, 0.5, 0.0], 0.01).unwrap().pass);
        assert!(goodness_of_fit(&[5, 5, 0], &[0.5, 0.5, 0.0], 0.01).unwrap().pass);
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta(1.0 / 3.0).unwrap(), 0.0);
        assert_eq!(eta(0.0).unwrap(), 1.0);
        assert!((eta(0.3).unwrap() - 0.19).abs() < 1e-15);
        assert!(eta(0.4).is_err());
    }

    #[test]
    fn wilson_covers_point_estimate() {
        let (lo, hi) = wilson_interval(95, 100, 1.96);
        assert!(lo < 0.95 && 0.95 < hi && hi <= 1.0);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn uniform_test_false_alarm_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 1000;
        let mut alarms = 0;
        for _ in 0..trials {
            let mut counts = [0u64; 3];
            for _ in 0..10_000 {
                counts[rng.random_range(0..3)] += 1;
            }
            alarms += u32::from(!uniform_test(&counts, 0.01).unwrap().pass);
        }
        assert!(alarms <= 20, "{alarms} false alarms in {trials}");
    }
}
