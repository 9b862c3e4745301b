use std::f64::consts::PI;

use super::{EnvError, EnvSpec, EpisodeClock, Env, StepResult};
use crate::neural::Rng;

const G: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_TORQUE: f64 = 2.0;
const MAX_SPEED: f64 = 8.0;

/// Angle wrapped into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

/// Torque-limited pendulum; angle 0 is upright.
///
/// Semi-implicit Euler: `w <- clip(w + (3g/2l sin t + 3/(m l^2) u) dt, -8, 8)`,
/// then `t <- t + w dt`. Reward is `-(wrap(t)^2 + 0.1 w^2 + 0.001 u^2)`
/// evaluated on the pre-step state. Never terminates; 200 steps.
#[derive(Debug, Clone)]
pub struct PendulumSwingUp {
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    clock: EpisodeClock,
}

impl Default for PendulumSwingUp {
    fn default() -> Self {
        Self::new()
    }
}

impl PendulumSwingUp {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                obs_dim: 3,
                action_dim: 1,
                action_low: vec![-MAX_TORQUE],
                action_high: vec![MAX_TORQUE],
                max_episode_steps: 200,
            },
            theta: 0.0,
            theta_dot: 0.0,
            clock: EpisodeClock::new(),
        }
    }

    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Env for PendulumSwingUp {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed);
        self.theta = rng.uniform(-PI, PI);
        self.theta_dot = rng.uniform(-1.0, 1.0);
        self.clock.restart();
        self.obs()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let (a, saturated) = self.clock.begin_step(&self.spec, action)?;
        let u = a[0];
        let th = wrap_angle(self.theta);
        let cost = th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u;

        let accel = 3.0 * G / (2.0 * LENGTH) * self.theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
        self.theta_dot = (self.theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += self.theta_dot * DT;

        let truncated = self.clock.end_step(&self.spec, false);
        Ok(StepResult {
            next_obs: self.obs(),
            reward: -cost,
            done: false,
            truncated,
            saturated,
        })
    }

    fn name(&self) -> &'static str {
        "pendulum"
    }
}
