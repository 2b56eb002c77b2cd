//! Trajectory tracking: pure-pursuit steering with rate-limited speed
//! control, and a gap-keeping follower for the uninstrumented car.

use serde::{Deserialize, Serialize};

use super::kinematics::VehicleState;
use super::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Minimum lookahead distance, m.
    pub lookahead: f64,
    /// Additional lookahead per m/s of commanded speed, s.
    pub lookahead_gain: f64,
    pub max_speed: f64,
    /// Speed command slew limit, m/s^2.
    pub max_accel: f64,
    pub max_omega: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            lookahead: 0.5,
            lookahead_gain: 0.3,
            max_speed: 20.0,
            max_accel: 3.0,
            max_omega: 3.0,
        }
    }
}

/// Pure-pursuit tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackController {
    pub config: ControllerConfig,
}

impl TrackController {
    pub fn new(config: ControllerConfig) -> Self {
        Self { config }
    }

    /// Speed command moving `speed` toward `target_speed` by at most
    /// `max_accel * dt`, clamped to `[0, max_speed]`.
    pub fn speed_command(&self, speed: f64, target_speed: f64, dt: f64) -> f64 {
        let step = self.config.max_accel * dt;
        (speed + (target_speed - speed).clamp(-step, step)).clamp(0.0, self.config.max_speed)
    }

    /// Angular velocity steering toward the lookahead point for speed `u_v`.
    pub fn steer(&self, s: &VehicleState, path: &Path, u_v: f64) -> f64 {
        let ld = self.config.lookahead + self.config.lookahead_gain * u_v.abs();
        let proj = path.project((s.x, s.y));
        let target = path.point_at(proj.station + ld);
        let (dx, dy) = (target.0 - s.x, target.1 - s.y);
        let (sin_t, cos_t) = s.theta.sin_cos();
        let local_x = cos_t * dx + sin_t * dy;
        let local_y = -sin_t * dx + cos_t * dy;
        let d2 = local_x * local_x + local_y * local_y;
        if d2 == 0.0 {
            return 0.0;
        }
        // curvature of the arc through the target tangent to the heading
        let curvature = 2.0 * local_y / d2;
        (u_v * curvature).clamp(-self.config.max_omega, self.config.max_omega)
    }

    /// Policy input `(u_g_v, u_g_omega)` given the current speed command.
    pub fn command(
        &self,
        s: &VehicleState,
        speed: f64,
        path: &Path,
        target_speed: f64,
        dt: f64,
    ) -> (f64, f64) {
        let u_v = self.speed_command(speed, target_speed, dt);
        (u_v, self.steer(s, path, u_v))
    }
}

/// Distance-keeping follower: matches the leader's perceived speed and
/// closes the gap error proportionally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowController {
    pub gap: f64,
    pub gap_gain: f64,
}

impl FollowController {
    pub fn speed_command(
        &self,
        tracker: &TrackController,
        own: &VehicleState,
        leader: &VehicleState,
        leader_speed: f64,
    ) -> f64 {
        let distance = (leader.x - own.x).hypot(leader.y - own.y);
        (leader_speed + self.gap_gain * (distance - self.gap)).clamp(0.0, tracker.config.max_speed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::kinematics::step_with_noise;
    use crate::sim::path::{oval_path, straight_path};

    #[test]
    fn aligned_on_path() {
        let path = straight_path((0.0, 0.0), 0.0, 50.0, 0.5).unwrap();
        let c = TrackController::new(ControllerConfig::default());
        let s = VehicleState::new(5.0, 0.0, 0.0);
        let (v, w) = c.command(&s, 2.0, &path, 2.0, 0.05);
        assert_eq!(v, 2.0);
        assert_eq!(w, 0.0);
    }

    #[test]
    fn left_of_path_steers_right() {
        let path = straight_path((0.0, 0.0), 0.0, 50.0, 0.5).unwrap();
        let c = TrackController::new(ControllerConfig::default());
        // heading +x, displaced to +y: cross(path dir, offset) > 0
        let s = VehicleState::new(5.0, 0.5, 0.0);
        let (_, w) = c.command(&s, 1.0, &path, 1.0, 0.05);
        assert!(w < 0.0, "{w}");
        let s = VehicleState::new(5.0, -0.5, 0.0);
        assert!(c.command(&s, 1.0, &path, 1.0, 0.05).1 > 0.0);
    }

    #[test]
    fn speed_is_slew_limited_and_saturated() {
        let c = TrackController::new(ControllerConfig {
            max_speed: 2.0,
            max_accel: 1.0,
            ..Default::default()
        });
        assert!((c.speed_command(0.0, 1.0, 0.1) - 0.1).abs() < 1e-15);
        assert_eq!(c.speed_command(1.95, 5.0, 0.1), 2.0);
        assert_eq!(c.speed_command(0.05, -1.0, 0.1), 0.0);
    }

    #[test]
    fn deterministic() {
        let path = oval_path(2.0, 1.5, 0.05).unwrap();
        let c = TrackController::new(ControllerConfig::default());
        let s = VehicleState::new(0.3, -1.2, 0.2);
        assert_eq!(c.command(&s, 1.0, &path, 1.0, 0.05), c.command(&s, 1.0, &path, 1.0, 0.05));
    }

    #[test]
    fn closed_loop_oval_tracking() {
        let path = oval_path(2.0, 1.5, 0.05).unwrap();
        let c = TrackController::new(ControllerConfig::default());
        let dt = 0.05;
        let mut s = VehicleState::new(0.0, -1.2, 0.3);
        let mut speed = 0.0;
        let mut dev_after = 0.0f64;
        for k in 0..10_000 {
            let (u_v, u_w) = c.command(&s, speed, &path, 1.0, dt);
            speed = u_v;
            s = step_with_noise(&s, u_v, u_w, 0.0, 0.0, dt).state;
            assert!(s.x.is_finite() && s.y.is_finite());
            if k > 400 {
                dev_after = dev_after.max(path.project((s.x, s.y)).distance);
            }
        }
        assert!(dev_after < 0.1, "max lateral deviation {dev_after}");
    }

    #[test]
    fn follower_closes_gap() {
        let c = TrackController::new(ControllerConfig::default());
        let f = FollowController { gap: 2.0, gap_gain: 0.5 };
        let own = VehicleState::new(0.0, 0.0, 0.0);
        let leader = VehicleState::new(3.0, 0.0, 0.0);
        assert_eq!(f.speed_command(&c, &own, &leader, 10.0), 10.5);
        let leader = VehicleState::new(2.0, 0.0, 0.0);
        assert_eq!(f.speed_command(&c, &own, &leader, 10.0), 10.0);
    }
}
