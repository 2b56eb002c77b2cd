use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::kinematics::{wrap_angle, VehicleState};
use super::Observation;

/// Where the sensor's velocity channels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocitySource {
    /// Direct speed measurement of the achieved velocity (radar-style).
    #[default]
    Reported,
    /// Finite differences of consecutive noisy poses.
    PoseDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub rate_hz: f64,
    pub position_std: f64,
    pub heading_std: f64,
    pub velocity_std: f64,
    pub omega_std: f64,
    pub velocity_source: VelocitySource,
    /// Assign visual IDs in a seeded random order instead of vehicle order.
    pub shuffle_ids: bool,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            rate_hz: 20.0,
            position_std: 0.0,
            heading_std: 0.0,
            velocity_std: 0.0,
            omega_std: 0.0,
            velocity_source: VelocitySource::Reported,
            shuffle_ids: false,
        }
    }
}

/// Spreadsheet-style labels: ID_A .. ID_Z, ID_AA, ...
pub fn visual_id_label(index: usize) -> String {
    let mut n = index + 1;
    let mut letters = Vec::new();
    while n > 0 {
        n -= 1;
        letters.push(b'A' + (n % 26) as u8);
        n /= 26;
    }
    letters.reverse();
    format!("ID_{}", String::from_utf8(letters).unwrap())
}

/// Ground truth handed to the sensor for one vehicle at one sensor tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueMotion {
    pub state: VehicleState,
    pub v: f64,
    pub omega: f64,
}

/// Noisy pose and velocity sensor with stable visual IDs.
#[derive(Debug, Clone)]
pub struct Sensor {
    config: SensorConfig,
    rng: ChaCha12Rng,
    /// Visual ID per vehicle index, fixed on construction.
    labels: Vec<String>,
    seen: Vec<bool>,
    /// Previous reported pose and time, for pose differencing.
    previous: Vec<Option<(f64, f64, f64, f64)>>,
}

impl Sensor {
    pub fn new(config: SensorConfig, vehicles: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..vehicles).collect();
        if config.shuffle_ids {
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng);
        }
        // order[k] is the k-th vehicle to be labelled
        let mut labels = vec![String::new(); vehicles];
        for (k, &v) in order.iter().enumerate() {
            labels[v] = visual_id_label(k);
        }
        Self {
            config,
            rng,
            labels,
            seen: vec![false; vehicles],
            previous: vec![None; vehicles],
        }
    }

    pub fn config(&self) -> &SensorConfig {
        &self.config
    }

    /// Records reference poses without emitting observations, so that pose
    /// differencing has a starting point.
    pub fn prime(&mut self, states: &[VehicleState], t: f64) {
        for (i, s) in states.iter().enumerate() {
            self.previous[i] = Some((s.x, s.y, s.theta, t));
        }
    }

    /// Visual ID of vehicle `index`, once it has been observed.
    pub fn visual_id(&self, index: usize) -> Option<&str> {
        self.seen[index].then(|| self.labels[index].as_str())
    }

    fn gauss(&mut self, std: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        std * z
    }

    pub fn sense(&mut self, truth: &[TrueMotion], t: f64) -> Vec<Observation> {
        let mut out = Vec::with_capacity(truth.len());
        for (i, m) in truth.iter().enumerate() {
            let c = self.config;
            let x = m.state.x + self.gauss(c.position_std);
            let y = m.state.y + self.gauss(c.position_std);
            let theta = wrap_angle(m.state.theta + self.gauss(c.heading_std));
            let nv = self.gauss(c.velocity_std);
            let nw = self.gauss(c.omega_std);
            let (v, omega) = match (c.velocity_source, self.previous[i]) {
                (VelocitySource::PoseDifference, Some((px, py, pth, pt))) if t > pt => {
                    let dt = t - pt;
                    let dist = (x - px).hypot(y - py);
                    // signed by motion relative to the reported heading
                    let sign = if (x - px) * theta.cos() + (y - py) * theta.sin() < 0.0 {
                        -1.0
                    } else {
                        1.0
                    };
                    (sign * dist / dt, wrap_angle(theta - pth) / dt)
                }
                _ => (m.v + nv, m.omega + nw),
            };
            self.previous[i] = Some((x, y, theta, t));
            self.seen[i] = true;
            out.push(Observation {
                visual_id: self.labels[i].clone(),
                t,
                x,
                y,
                theta,
                v,
                omega,
            });
        }
        out
    }
}
