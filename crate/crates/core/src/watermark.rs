//! Seeded Gaussian private excitation ("watermark") sequences.
//!
//! Each participating vehicle owns one [`Generator`]. Every control tick it
//! draws one [`ExcitationSample`] and superposes it on the policy-specified
//! input with [`inject`]. The sample is then reported to the roadside unit,
//! which is the only other party that ever sees it.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variances of the translational and angular watermark channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WatermarkConfig {
    /// Translational velocity watermark variance, (m/s)^2.
    pub sigma2_e_v: f64,
    /// Angular velocity watermark variance, (rad/s)^2.
    pub sigma2_e_omega: f64,
    pub seed: u64,
}

impl WatermarkConfig {
    pub fn new(sigma2_e_v: f64, sigma2_e_omega: f64, seed: u64) -> Self {
        Self {
            sigma2_e_v,
            sigma2_e_omega,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("sigma2_e_v", self.sigma2_e_v),
            ("sigma2_e_omega", self.sigma2_e_omega),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::config(format!(
                    "{name} must be a finite non-negative variance, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// A participating vehicle needs at least one non-degenerate channel.
    pub fn is_active(&self) -> bool {
        self.sigma2_e_v > 0.0 || self.sigma2_e_omega > 0.0
    }
}

/// One tick of private excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSample {
    pub tick: u64,
    pub e_v: f64,
    pub e_omega: f64,
}

impl ExcitationSample {
    pub const ZERO: ExcitationSample = ExcitationSample {
        tick: 0,
        e_v: 0.0,
        e_omega: 0.0,
    };
}

/// Deterministic watermark stream. Both channels always consume one normal
/// deviate each per tick, so zeroing one variance never shifts the other
/// channel's sequence.
#[derive(Debug, Clone)]
pub struct Generator {
    rng: ChaCha12Rng,
    std_v: f64,
    std_omega: f64,
    next_tick: u64,
}

impl Generator {
    pub fn new(config: WatermarkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            rng: ChaCha12Rng::seed_from_u64(config.seed),
            std_v: config.sigma2_e_v.sqrt(),
            std_omega: config.sigma2_e_omega.sqrt(),
            next_tick: 0,
        })
    }

    pub fn draw(&mut self) -> ExcitationSample {
        let z_v: f64 = StandardNormal.sample(&mut self.rng);
        let z_omega: f64 = StandardNormal.sample(&mut self.rng);
        let sample = ExcitationSample {
            tick: self.next_tick,
            e_v: self.std_v * z_v,
            e_omega: self.std_omega * z_omega,
        };
        self.next_tick += 1;
        sample
    }

    pub fn next_tick(&self) -> u64 {
        self.next_tick
    }
}

impl Iterator for Generator {
    type Item = ExcitationSample;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.draw())
    }
}

/// Total applied input: policy input plus watermark, per channel.
pub fn inject(u_g_v: f64, u_g_omega: f64, e: &ExcitationSample) -> (f64, f64) {
    (u_g_v + e.e_v, u_g_omega + e.e_omega)
}
