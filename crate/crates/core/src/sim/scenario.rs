use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::config::{Role, ScenarioConfig};
use super::controller::{FollowController, TrackController};
use super::kinematics::{step_kinematics, VehicleState};
use super::sensor::{Sensor, TrueMotion};
use super::Observation;
use crate::error::Result;
use crate::net::{PacketRecord, WatermarkPacket};
use crate::watermark::{inject, ExcitationSample, Generator, WatermarkConfig};

/// Per-vehicle, per-tick internals of a run, kept for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickTrace {
    pub vehicle: usize,
    pub tick: u64,
    pub u_g_v: f64,
    pub u_g_omega: f64,
    pub e_v: f64,
    pub e_omega: f64,
    pub w_v: f64,
    pub w_omega: f64,
    pub v_achieved: f64,
    pub omega_achieved: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Ground-truth association of an address with a visual ID.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TruthPair {
    pub address: String,
    pub visual_id: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioLog {
    pub observations: Vec<Observation>,
    pub packets: Vec<PacketRecord>,
    pub truth: Vec<TruthPair>,
    pub trace: Vec<TickTrace>,
}

/// Independent RNG stream number `stream` of a scenario seed (splitmix64).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the closed loop: controller, watermark draw, injection, kinematic
/// step for every vehicle on every tick; observations on sensor ticks.
///
/// Packets carry tick `k` and timestamp `k * dt`; the observation of the
/// motion produced during tick `k` is stamped `(k + 1) * dt`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioLog> {
    cfg.validate()?;
    let path = cfg.path.build()?;
    let dt = cfg.dt;
    let dt_us = cfg.dt_us();
    let tracker = TrackController::new(cfg.controller);
    let n = cfg.vehicles.len();

    let mut states: Vec<VehicleState> = cfg
        .vehicles
        .iter()
        .map(|v| {
            let (px, py) = path.point_at(v.start_station);
            let heading = path.heading_at(v.start_station);
            let (nx, ny) = (-heading.sin(), heading.cos());
            VehicleState::new(px + v.start_offset * nx, py + v.start_offset * ny, heading)
        })
        .collect();
    let mut speed_cmd: Vec<f64> = cfg
        .vehicles
        .iter()
        .map(|v| v.initial_speed.unwrap_or(v.target_speed))
        .collect();
    let mut achieved_v = speed_cmd.clone();

    let mut generators: Vec<Option<Generator>> = Vec::with_capacity(n);
    for (i, v) in cfg.vehicles.iter().enumerate() {
        generators.push(match v.address {
            Some(_) => Some(Generator::new(WatermarkConfig::new(
                v.watermark.sigma2_e_v,
                v.watermark.sigma2_e_omega,
                v.watermark.seed.unwrap_or_else(|| derive_seed(cfg.seed, 1 + 2 * i as u64)),
            ))?),
            None => None,
        });
    }
    let mut noise_rngs: Vec<ChaCha12Rng> = (0..n)
        .map(|i| ChaCha12Rng::seed_from_u64(derive_seed(cfg.seed, 2 + 2 * i as u64)))
        .collect();
    let mut sensor = Sensor::new(cfg.sensor, n, derive_seed(cfg.seed, 0));
    sensor.prime(&states, 0.0);

    let ticks = cfg.ticks();
    let period = cfg.sensor_period_ticks();
    let mut log = ScenarioLog::default();
    let mut motion = vec![
        TrueMotion {
            state: states[0],
            v: 0.0,
            omega: 0.0,
        };
        n
    ];

    for k in 0..ticks {
        let snapshot = states.clone();
        let perceived = achieved_v.clone();
        for (i, spec) in cfg.vehicles.iter().enumerate() {
            let s = &snapshot[i];
            let u_g_v = match spec.role {
                Role::Track => tracker.speed_command(speed_cmd[i], spec.target_speed, dt),
                Role::Follow => {
                    let leader = spec.leader.expect("validated");
                    FollowController {
                        gap: spec.gap,
                        gap_gain: spec.gap_gain,
                    }
                    .speed_command(&tracker, s, &snapshot[leader], perceived[leader])
                }
            };
            let u_g_omega = tracker.steer(s, &path, u_g_v);
            speed_cmd[i] = u_g_v;

            let e = match generators[i].as_mut() {
                Some(g) => g.draw(),
                None => ExcitationSample { tick: k, ..ExcitationSample::ZERO },
            };
            let (u_v, u_omega) = inject(u_g_v, u_g_omega, &e);
            let out = step_kinematics(s, u_v, u_omega, &spec.noise, dt, &mut noise_rngs[i]);
            states[i] = out.state;
            achieved_v[i] = out.v_achieved;
            motion[i] = TrueMotion {
                state: out.state,
                v: out.v_achieved,
                omega: out.omega_achieved,
            };

            if let Some(address) = &spec.address {
                log.packets.push(PacketRecord {
                    address: address.clone(),
                    packet: WatermarkPacket::new(
                        k as u32,
                        k * dt_us,
                        u_g_v,
                        u_g_omega,
                        e.e_v,
                        e.e_omega,
                    ),
                });
            }
            log.trace.push(TickTrace {
                vehicle: i,
                tick: k,
                u_g_v,
                u_g_omega,
                e_v: e.e_v,
                e_omega: e.e_omega,
                w_v: out.w_v,
                w_omega: out.w_omega,
                v_achieved: out.v_achieved,
                omega_achieved: out.omega_achieved,
                x: out.state.x,
                y: out.state.y,
                theta: out.state.theta,
            });
        }
        if (k + 1) % period == 0 {
            let t = ((k + 1) * dt_us) as f64 / 1e6;
            log.observations.extend(sensor.sense(&motion, t));
        }
    }

    for (i, spec) in cfg.vehicles.iter().enumerate() {
        if let (Some(address), Some(vid)) = (&spec.address, sensor.visual_id(i)) {
            log.truth.push(TruthPair {
                address: address.clone(),
                visual_id: vid.to_string(),
            });
        }
    }
    log.truth.sort();
    Ok(log)
}
