use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.01;

/// Outcome of a two-sided finite-sample chi-square test on a sum of squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    /// `sum_sq / sigma2`.
    pub statistic: f64,
    pub dof: u64,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// Quantile of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_quantile(p: f64, dof: u64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::argument(format!("probability must lie in (0, 1), got {p}")));
    }
    if dof == 0 {
        return Err(Error::argument("chi-square needs at least one degree of freedom"));
    }
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::argument(format!("chi-square with {dof} dof: {e}")))?;
    Ok(dist.inverse_cdf(p))
}

/// Accept iff `Q = sum_sq / sigma2` lies in the closed interval between the
/// `alpha/2` and `1 - alpha/2` quantiles of chi-square with `count` dof.
pub fn chi2_test(sum_sq: f64, count: u64, sigma2: f64, alpha: f64) -> Result<TestVerdict> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::argument(format!("hypothesised variance must be positive, got {sigma2}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::argument(format!("significance must lie in (0, 1), got {alpha}")));
    }
    if count == 0 {
        return Err(Error::argument("chi-square test needs at least one sample"));
    }
    let lower = chi2_quantile(alpha / 2.0, count)?;
    let upper = chi2_quantile(1.0 - alpha / 2.0, count)?;
    let statistic = sum_sq / sigma2;
    Ok(TestVerdict {
        statistic,
        dof: count,
        lower,
        upper,
        pass: lower <= statistic && statistic <= upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn table_value_dof10() {
        // Monte Carlo oracle: empirical 95th percentile of sums of 10 squared
        // standard normals, cross-checked with the tabulated 18.307.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut sums: Vec<f64> = (0..200_000)
            .map(|_| {
                (0..10)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z * z
                    })
                    .sum()
            })
            .collect();
        sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let empirical = sums[(0.95 * sums.len() as f64) as usize];
        assert!((empirical / 18.307 - 1.0).abs() < 0.01, "MC {empirical}");

        let q = chi2_quantile(0.95, 10).unwrap();
        assert!((q / 18.307 - 1.0).abs() < 0.01, "{q}");
        assert!((q / empirical - 1.0).abs() < 0.01);
    }

    #[test]
    fn median_approaches_dof_minus_two_thirds() {
        for dof in [200u64, 1000, 5000] {
            let m = chi2_quantile(0.5, dof).unwrap();
            let target = dof as f64 - 2.0 / 3.0;
            assert!((m - target).abs() / (dof as f64) < 1e-3, "dof {dof}: {m}");
        }
    }

    #[test]
    fn quantiles_ordered_around_dof() {
        let lo = chi2_quantile(0.025, 100).unwrap();
        let hi = chi2_quantile(0.975, 100).unwrap();
        assert!(lo < 100.0 && 100.0 < hi);
    }

    #[test]
    fn quantile_domain_errors() {
        assert!(chi2_quantile(0.0, 10).is_err());
        assert!(chi2_quantile(1.0, 10).is_err());
        assert!(chi2_quantile(0.5, 0).is_err());
        assert!(chi2_quantile(f64::NAN, 3).is_err());
    }

    #[test]
    fn closed_interval_boundaries_pass() {
        let base = chi2_test(1.0, 50, 1.0, 0.01).unwrap();
        let at_lower = chi2_test(base.lower, 50, 1.0, 0.01).unwrap();
        assert!(at_lower.pass);
        let at_upper = chi2_test(base.upper, 50, 1.0, 0.01).unwrap();
        assert!(at_upper.pass);
        let below = chi2_test(base.lower * (1.0 - 1e-12), 50, 1.0, 0.01).unwrap();
        assert!(!below.pass);
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(chi2_test(1.0, 10, 0.0, 0.01), Err(Error::Argument(_))));
        assert!(matches!(chi2_test(1.0, 10, -1.0, 0.01), Err(Error::Argument(_))));
        assert!(chi2_test(1.0, 10, 1.0, 0.0).is_err());
        assert!(chi2_test(1.0, 0, 1.0, 0.01).is_err());
    }
}
