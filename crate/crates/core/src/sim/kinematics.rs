use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::detector::NoiseConfig;

/// Ground-truth pose of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Heading in (-pi, pi].
    pub theta: f64,
    pub tick: u64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            tick: 0,
        }
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Result of one Euler step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: VehicleState,
    /// Translational velocity actually realised, `u_v + w_v`.
    pub v_achieved: f64,
    /// Angular velocity actually realised, `u_omega + w_omega`.
    pub omega_achieved: f64,
    pub w_v: f64,
    pub w_omega: f64,
    /// Heading before wrapping.
    pub theta_unwrapped: f64,
}

/// One Euler step of the unicycle model with additive velocity noise.
///
/// Both noise terms are drawn on every call, even for zero variances, so the
/// random stream does not depend on the noise configuration.
pub fn step_kinematics<R: Rng + ?Sized>(
    s: &VehicleState,
    u_v: f64,
    u_omega: f64,
    noise: &NoiseConfig,
    dt: f64,
    rng: &mut R,
) -> StepOutcome {
    let z_v: f64 = StandardNormal.sample(rng);
    let z_omega: f64 = StandardNormal.sample(rng);
    let w_v = noise.sigma2_w_v.sqrt() * z_v;
    let w_omega = noise.sigma2_w_omega.sqrt() * z_omega;
    step_with_noise(s, u_v, u_omega, w_v, w_omega, dt)
}

/// Deterministic step with explicit noise realisations.
pub fn step_with_noise(
    s: &VehicleState,
    u_v: f64,
    u_omega: f64,
    w_v: f64,
    w_omega: f64,
    dt: f64,
) -> StepOutcome {
    let v = u_v + w_v;
    let omega = u_omega + w_omega;
    let theta_unwrapped = s.theta + dt * omega;
    StepOutcome {
        state: VehicleState {
            x: s.x + dt * s.theta.cos() * v,
            y: s.y + dt * s.theta.sin() * v,
            theta: wrap_angle(theta_unwrapped),
            tick: s.tick + 1,
        },
        v_achieved: v,
        omega_achieved: omega,
        w_v,
        w_omega,
        theta_unwrapped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_input_is_fixed_point() {
        let s = VehicleState::new(1.5, -2.0, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = step_kinematics(&s, 0.0, 0.0, &NoiseConfig::default(), 0.05, &mut rng);
        assert_eq!((out.state.x, out.state.y, out.state.theta), (s.x, s.y, s.theta));
        assert_eq!(out.state.tick, 1);
    }

    #[test]
    fn axis_aligned_motion() {
        let s = VehicleState::new(0.0, 0.0, 0.0);
        let out = step_with_noise(&s, 1.0, 0.0, 0.0, 0.0, 0.05);
        assert_eq!(out.state.x, 0.05);
        assert_eq!(out.state.y, 0.0);
        assert_eq!(out.state.theta, 0.0);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        for k in -20..20 {
            let a = wrap_angle(k as f64 * 0.77);
            assert!(a > -PI && a <= PI);
        }
    }

    #[test]
    fn heading_increment_exact_before_wrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = NoiseConfig::new(0.01, 0.02);
        let mut s = VehicleState::new(0.0, 0.0, 3.0);
        for _ in 0..1000 {
            let out = step_kinematics(&s, 1.0, 0.8, &noise, 0.05, &mut rng);
            assert_eq!(out.theta_unwrapped, s.theta + 0.05 * (0.8 + out.w_omega));
            assert_eq!(out.state.theta, wrap_angle(out.theta_unwrapped));
            assert!(out.state.theta > -PI && out.state.theta <= PI);
            s = out.state;
        }
    }

    #[test]
    fn same_velocity_perturbation_in_both_axes() {
        let s = VehicleState::new(0.0, 0.0, 0.6);
        let out = step_with_noise(&s, 1.0, 0.0, 0.3, 0.0, 0.1);
        let d = (out.state.x.powi(2) + out.state.y.powi(2)).sqrt();
        assert!((d - 0.13).abs() < 1e-12);
        assert!((out.state.y.atan2(out.state.x) - 0.6).abs() < 1e-12);
    }

    /// Radius of the circle through three points.
    fn circumradius(p: [(f64, f64); 3]) -> f64 {
        let a = ((p[1].0 - p[2].0).powi(2) + (p[1].1 - p[2].1).powi(2)).sqrt();
        let b = ((p[0].0 - p[2].0).powi(2) + (p[0].1 - p[2].1).powi(2)).sqrt();
        let c = ((p[0].0 - p[1].0).powi(2) + (p[0].1 - p[1].1).powi(2)).sqrt();
        let area2 = ((p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1)).abs();
        a * b * c / (2.0 * area2)
    }

    #[test]
    fn circular_motion_converges_with_step_size() {
        let omega = PI / 10.0;
        let target = 10.0 / PI;
        let mut errors = Vec::new();
        for dt in [0.1, 0.05, 0.025] {
            let mut s = VehicleState::new(0.0, 0.0, 0.0);
            let steps = (20.0 / dt) as usize; // one full revolution
            let mut pts = Vec::new();
            for k in 0..steps {
                let out = step_with_noise(&s, 1.0, omega, 0.0, 0.0, dt);
                // heading after k+1 steps is exactly the accumulated increments
                let expect = wrap_angle((k + 1) as f64 * dt * omega);
                assert!((out.state.theta - expect).abs() < 1e-9);
                s = out.state;
                pts.push((s.x, s.y));
            }
            let r = circumradius([pts[0], pts[steps / 3], pts[2 * steps / 3]]);
            errors.push((r - target).abs());
        }
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
        assert!(errors[2] < 0.01);
    }
}
