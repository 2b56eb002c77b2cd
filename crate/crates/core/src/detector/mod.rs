//! Watermark residuals and their second-moment statistics.
//!
//! Two families of residuals are computed. Test 1 subtracts the reported
//! watermark and, for a correctly paired stream, leaves only process noise.
//! Test 2 keeps the watermark in, so its honest limit also carries the
//! watermark variance. A mismatched pairing inflates the Test-1 statistic by
//! the sum of both vehicles' watermark variances, which is what the matcher
//! exploits.

mod accumulator;
mod chi2;
mod scalar;

pub use accumulator::{Channel, DEFAULT_WINDOW, PairAccumulator, PairResiduals, ResidualSeries, TestKind};
pub use chi2::{chi2_quantile, chi2_test, TestVerdict, DEFAULT_ALPHA};
pub use scalar::{residual_t1_scalar, residual_t2_scalar, ScalarModel, ScalarPlant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Process-noise variances of one vehicle's velocity channels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma2_w_v: f64,
    pub sigma2_w_omega: f64,
}

impl NoiseConfig {
    pub fn new(sigma2_w_v: f64, sigma2_w_omega: f64) -> Self {
        Self {
            sigma2_w_v,
            sigma2_w_omega,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2_w_v >= 0.0 && self.sigma2_w_omega >= 0.0)
            || !self.sigma2_w_v.is_finite()
            || !self.sigma2_w_omega.is_finite()
        {
            return Err(Error::config(format!(
                "process noise variances must be finite and non-negative, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Test-1 velocity residual: observed velocity minus the claimed input and
/// the claimed watermark of the previous tick.
///
/// Evaluated as `o - (u_g + e)`, the same grouping the actuator uses to
/// form the applied input.
#[inline]
pub fn residual_v1(o_v: f64, u_g_v_prev: f64, e_v_prev: f64) -> f64 {
    o_v - (u_g_v_prev + e_v_prev)
}

/// Test-2 velocity residual: observed velocity minus the claimed input only.
#[inline]
pub fn residual_v2(o_v: f64, u_g_v_prev: f64) -> f64 {
    o_v - u_g_v_prev
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn noise_free_matched_residuals_vanish() {
        assert_eq!(residual_v1(1.25, 1.0, 0.25), 0.0);
        assert_eq!(residual_v2(1.0, 1.0), 0.0);
    }

    /// Monte Carlo over the velocity model: o[t] = u_g[t-1] + e[t-1] + w[t-1].
    fn velocity_trial(
        seed: u64,
        t: usize,
        s2e_i: f64,
        s2e_n: f64,
        s2w: f64,
    ) -> (f64, f64, f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ei = Normal::new(0.0, s2e_i.sqrt()).unwrap();
        let en = Normal::new(0.0, s2e_n.sqrt()).unwrap();
        let w = Normal::new(0.0, s2w.sqrt()).unwrap();
        let (mut m1, mut m2, mut x1, mut x2) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..t {
            let u_g = 1.0 + 0.2 * (k as f64 * 0.01).sin();
            let e_i = ei.sample(&mut rng);
            let e_n = en.sample(&mut rng);
            let o_i = u_g + e_i + w.sample(&mut rng);
            let o_n = u_g + e_n + w.sample(&mut rng);
            m1 += residual_v1(o_i, u_g, e_i).powi(2);
            m2 += residual_v2(o_i, u_g).powi(2);
            x1 += residual_v1(o_n, u_g, e_i).powi(2);
            x2 += residual_v2(o_n, u_g).powi(2);
        }
        let n = t as f64;
        (m1 / n, m2 / n, x1 / n, x2 / n)
    }

    #[test]
    fn matched_v1_converges_to_process_noise() {
        let (m1, _, _, _) = velocity_trial(1, 2000, 0.07, 0.38, 0.005);
        assert!((m1 / 0.005 - 1.0).abs() < 0.15, "{m1}");
    }

    #[test]
    fn mismatched_v1_adds_both_watermark_variances() {
        let (_, _, x1, _) = velocity_trial(2, 2000, 0.07, 0.38, 0.005);
        assert!((x1 / 0.455 - 1.0).abs() < 0.15, "{x1}");
    }

    #[test]
    fn matched_v2_carries_watermark_variance() {
        let (_, m2, _, _) = velocity_trial(3, 2000, 0.07, 0.38, 0.005);
        assert!((m2 / 0.075 - 1.0).abs() < 0.15, "{m2}");
    }

    #[test]
    fn separation_gap_matches_sum_of_watermark_variances() {
        let (m1, _, x1, _) = velocity_trial(4, 2000, 0.07, 0.38, 0.005);
        let gap = x1 - m1;
        assert!((gap / 0.45 - 1.0).abs() < 0.20, "gap {gap}");
    }

    #[test]
    fn test2_cannot_separate_identical_inputs() {
        // With equal u_g, the mismatched Test-2 residual of vehicle n is
        // e_n + w, whose mean square matches that of a vehicle with the same
        // watermark variance. Compare two vehicles sharing sigma_e.
        let runs = 40;
        let diffs: Vec<f64> = (0..runs)
            .map(|s| {
                let (_, m2, _, x2) = velocity_trial(100 + s, 2000, 0.07, 0.07, 0.005);
                x2 - m2
            })
            .collect();
        let mean = diffs.iter().sum::<f64>() / runs as f64;
        let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (runs as f64 - 1.0))
            .sqrt();
        let se = sd / (runs as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean diff {mean}, se {se}");
    }

    #[test]
    fn mismatched_v2_exceeds_matched_by_input_difference() {
        // o_n is driven by its own input u_n; residual against u_i picks up
        // du = u_n - u_i. E[V2^2] grows by mean(du^2).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = Normal::new(0.0, 0.07f64.sqrt()).unwrap();
        let w = Normal::new(0.0, 0.005f64.sqrt()).unwrap();
        let t = 20_000;
        let (mut matched, mut mismatched, mut du2) = (0.0, 0.0, 0.0);
        for k in 0..t {
            let u_i = 1.0;
            let u_n = 1.0 + 0.3 * (k as f64 * 0.05).sin();
            let o_n = u_n + e.sample(&mut rng) + w.sample(&mut rng);
            matched += residual_v2(o_n, u_n).powi(2);
            mismatched += residual_v2(o_n, u_i).powi(2);
            du2 += (u_n - u_i).powi(2);
        }
        let n = t as f64;
        let excess = (mismatched - matched) / n;
        assert!((excess / (du2 / n) - 1.0).abs() < 0.15, "excess {excess}");
    }

    #[test]
    fn noise_config_validation() {
        assert!(NoiseConfig::new(0.0, 0.0).validate().is_ok());
        assert!(NoiseConfig::new(-0.1, 0.0).validate().is_err());
        assert!(NoiseConfig::new(0.1, f64::INFINITY).validate().is_err());
    }
}
