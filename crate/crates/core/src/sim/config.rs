use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::controller::ControllerConfig;
use super::path::{oval_path, straight_path, Path};
use super::sensor::SensorConfig;
use crate::detector::NoiseConfig;
use crate::error::{Error, Result};

/// Scenario description, read from TOML.
///
/// ```toml
/// name = "example"
/// dt = 0.05
/// duration = 30.0
/// seed = 1
///
/// [sensor]
/// rate_hz = 20.0
///
/// [path]
/// kind = "oval"
/// half_length = 2.0
/// radius = 1.5
///
/// [[vehicles]]
/// address = "IP_1"
/// target_speed = 1.0
/// watermark = { sigma2_e_v = 0.07 }
/// noise = { sigma2_w_v = 0.005, sigma2_w_omega = 0.005 }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Control sampling period, s.
    pub dt: f64,
    /// Simulated time, s.
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    pub path: PathSpec,
    pub vehicles: Vec<VehicleSpec>,
    /// Significance of the per-pair chi-square verdicts in reports.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_alpha() -> f64 {
    crate::detector::DEFAULT_ALPHA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    Oval {
        half_length: f64,
        radius: f64,
        #[serde(default = "default_spacing")]
        spacing: f64,
    },
    Straight {
        #[serde(default)]
        start: (f64, f64),
        #[serde(default)]
        heading: f64,
        length: f64,
        #[serde(default = "default_spacing")]
        spacing: f64,
    },
}

fn default_spacing() -> f64 {
    0.1
}

impl PathSpec {
    pub fn build(&self) -> Result<Path> {
        match *self {
            PathSpec::Oval {
                half_length,
                radius,
                spacing,
            } => oval_path(half_length, radius, spacing),
            PathSpec::Straight {
                start,
                heading,
                length,
                spacing,
            } => straight_path(start, heading, length, spacing),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Tracks the path at `target_speed`.
    #[default]
    Track,
    /// Keeps `gap` metres behind vehicle `leader`.
    Follow,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatermarkSpec {
    #[serde(default)]
    pub sigma2_e_v: f64,
    #[serde(default)]
    pub sigma2_e_omega: f64,
    /// Defaults to a stream derived from the scenario seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    /// Communication address. Vehicles without one neither watermark nor
    /// transmit.
    #[serde(default)]
    pub address: Option<String>,
    #[serde(default)]
    pub role: Role,
    #[serde(default)]
    pub target_speed: f64,
    /// Initial speed command; defaults to `target_speed`.
    #[serde(default)]
    pub initial_speed: Option<f64>,
    /// Arc length along the path where the vehicle starts, m.
    #[serde(default)]
    pub start_station: f64,
    /// Initial lateral offset to the left of the path, m.
    #[serde(default)]
    pub start_offset: f64,
    #[serde(default)]
    pub watermark: WatermarkSpec,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub leader: Option<usize>,
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default = "default_gap_gain")]
    pub gap_gain: f64,
}

fn default_gap() -> f64 {
    2.0
}

fn default_gap_gain() -> f64 {
    0.5
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serialises")
    }

    /// Control period in whole microseconds.
    pub fn dt_us(&self) -> u64 {
        (self.dt * 1e6).round() as u64
    }

    /// Number of control ticks in the run.
    pub fn ticks(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }

    /// Control ticks per sensor tick.
    pub fn sensor_period_ticks(&self) -> u64 {
        (1.0 / (self.sensor.rate_hz * self.dt)).round().max(1.0) as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.dt_us() == 0 || ((self.dt_us() as f64) - self.dt * 1e6).abs() > 1e-6 {
            return Err(Error::config("dt must be a whole number of microseconds"));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::config(format!("duration must be non-negative, got {}", self.duration)));
        }
        if self.ticks() > u32::MAX as u64 {
            return Err(Error::config("duration exceeds the 32-bit sequence space"));
        }
        let s = &self.sensor;
        if !(s.rate_hz > 0.0) {
            return Err(Error::config("sensor rate must be positive"));
        }
        let ratio = 1.0 / (s.rate_hz * self.dt);
        if ratio < 1.0 - 1e-9 {
            return Err(Error::config(format!(
                "sensor rate {} Hz outpaces the control rate {} Hz",
                s.rate_hz,
                1.0 / self.dt
            )));
        }
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::config("sensor period must be a whole number of control ticks"));
        }
        for (name, v) in [
            ("position_std", s.position_std),
            ("heading_std", s.heading_std),
            ("velocity_std", s.velocity_std),
            ("omega_std", s.omega_std),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("sensor {name} must be non-negative")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha must lie in (0, 1)"));
        }
        let c = &self.controller;
        if !(c.lookahead > 0.0 && c.lookahead_gain >= 0.0 && c.max_speed > 0.0 && c.max_accel > 0.0 && c.max_omega > 0.0) {
            return Err(Error::config("controller gains must be positive"));
        }
        self.path.build()?;
        if self.vehicles.is_empty() {
            return Err(Error::config("scenario has no vehicles"));
        }
        let mut addresses = std::collections::HashSet::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            v.noise.validate()?;
            let wm = crate::watermark::WatermarkConfig::new(v.watermark.sigma2_e_v, v.watermark.sigma2_e_omega, 0);
            wm.validate()?;
            match &v.address {
                Some(a) => {
                    if a.is_empty() || a.contains(',') || a.contains('\n') {
                        return Err(Error::config(format!("vehicle {i}: invalid address {a:?}")));
                    }
                    if !addresses.insert(a.clone()) {
                        return Err(Error::config(format!("duplicate address {a}")));
                    }
                    if !wm.is_active() {
                        return Err(Error::config(format!(
                            "vehicle {i} ({a}) transmits but has no watermark variance"
                        )));
                    }
                }
                None if wm.is_active() => {
                    return Err(Error::config(format!(
                        "vehicle {i} has a watermark but no address"
                    )));
                }
                None => {}
            }
            if !(v.target_speed >= 0.0) {
                return Err(Error::config(format!("vehicle {i}: negative target speed")));
            }
            match v.role {
                Role::Track => {}
                Role::Follow => match v.leader {
                    Some(l) if l < i => {}
                    Some(l) => {
                        return Err(Error::config(format!(
                            "vehicle {i} follows vehicle {l}, which must precede it"
                        )))
                    }
                    None => return Err(Error::config(format!("vehicle {i} follows nobody"))),
                },
            }
        }
        Ok(())
    }
}
