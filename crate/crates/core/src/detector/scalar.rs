use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First-order stochastic plant `y[t+1] = a y[t] + b u[t] + w[t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarModel {
    pub a: f64,
    pub b: f64,
    pub sigma2_w: f64,
}

impl ScalarModel {
    pub fn new(a: f64, b: f64, sigma2_w: f64) -> Result<Self> {
        if !(sigma2_w >= 0.0) || !sigma2_w.is_finite() || !a.is_finite() || !b.is_finite() {
            return Err(Error::config(format!(
                "invalid scalar model a={a}, b={b}, sigma2_w={sigma2_w}"
            )));
        }
        Ok(Self { a, b, sigma2_w })
    }

    /// Honest Test-1 limit.
    pub fn test1_target(&self) -> f64 {
        self.sigma2_w
    }

    /// Honest Test-2 limit for watermark variance `sigma2_e`.
    pub fn test2_target(&self, sigma2_e: f64) -> f64 {
        self.b * self.b * sigma2_e + self.sigma2_w
    }
}

/// Test-1 residual: `z[t] - a z[t-1] - b u_g[t-1] - b e[t-1]`.
pub fn residual_t1_scalar(z_t: f64, z_prev: f64, u_g_prev: f64, e_prev: f64, m: &ScalarModel) -> f64 {
    z_t - m.a * z_prev - m.b * u_g_prev - m.b * e_prev
}

/// Test-2 residual: `z[t] - a z[t-1] - b u_g[t-1]`.
pub fn residual_t2_scalar(z_t: f64, z_prev: f64, u_g_prev: f64, m: &ScalarModel) -> f64 {
    z_t - m.a * z_prev - m.b * u_g_prev
}

/// State of a simulated scalar plant.
#[derive(Debug, Clone)]
pub struct ScalarPlant {
    pub model: ScalarModel,
    pub y: f64,
}

impl ScalarPlant {
    pub fn new(model: ScalarModel, y0: f64) -> Self {
        Self { model, y: y0 }
    }

    /// Apply total input `u` for one tick and return the new output.
    pub fn step<R: Rng + ?Sized>(&mut self, u: f64, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        let w = self.model.sigma2_w.sqrt() * z;
        self.y = self.model.a * self.y + self.model.b * u + w;
        self.y
    }
}
