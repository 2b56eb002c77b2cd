//! Closed-loop multi-vehicle simulator with watermarking actuators and a
//! noisy visual sensor.

pub mod config;
pub mod controller;
pub mod kinematics;
pub mod path;
pub mod scenario;
pub mod sensor;

pub use config::{PathSpec, Role, ScenarioConfig, VehicleSpec, WatermarkSpec};
pub use controller::{ControllerConfig, FollowController, TrackController};
pub use kinematics::{step_kinematics, step_with_noise, wrap_angle, StepOutcome, VehicleState};
pub use path::{oval_path, straight_path, Path};
pub use scenario::{derive_seed, run_scenario, ScenarioLog, TickTrace, TruthPair};
pub use sensor::{Sensor, SensorConfig, TrueMotion, VelocitySource};

use serde::{Deserialize, Serialize};

/// One sensed vehicle record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub visual_id: String,
    /// Sample time, s since scenario epoch.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

/// Reference scenarios shipped with the crate.
pub mod bundled {
    use super::ScenarioConfig;
    use crate::error::{Error, Result};

    pub const LAB_TWO_VEHICLE: &str = include_str!("../../configs/lab_two_vehicle.toml");
    pub const FIELD_TWO_CAR: &str = include_str!("../../configs/field_two_car.toml");

    pub fn names() -> &'static [&'static str] {
        &["lab_two_vehicle", "field_two_car"]
    }

    pub fn get(name: &str) -> Result<ScenarioConfig> {
        let text = match name {
            "lab_two_vehicle" => LAB_TWO_VEHICLE,
            "field_two_car" => FIELD_TWO_CAR,
            other => return Err(Error::Config(format!("no bundled scenario named {other:?}"))),
        };
        ScenarioConfig::from_toml_str(text)
    }
}
