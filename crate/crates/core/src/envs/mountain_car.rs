use super::{EnvError, EnvSpec, EpisodeClock, Env, StepResult};
use crate::neural::Rng;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.45;
const POWER: f64 = 0.0015;
const GRAVITY: f64 = 0.0025;
const GOAL_REWARD: f64 = 100.0;
const ACTION_COST: f64 = 0.01;

/// Underpowered car in a valley with a sparse flag reward.
///
/// `v <- clip(v + 0.0015 u - 0.0025 cos(3p), -0.07, 0.07)`,
/// `p <- clip(p + v, -1.2, 0.6)`. Each step costs `0.01 u^2`; reaching
/// `p >= 0.45` pays 100 and terminates. Starts at `p ~ U[-0.6, -0.4]`,
/// `v = 0`; 999 steps.
#[derive(Debug, Clone)]
pub struct SparseMountainCar {
    spec: EnvSpec,
    position: f64,
    velocity: f64,
    clock: EpisodeClock,
}

impl Default for SparseMountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl SparseMountainCar {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                obs_dim: 2,
                action_dim: 1,
                action_low: vec![-1.0],
                action_high: vec![1.0],
                max_episode_steps: 999,
            },
            position: -0.5,
            velocity: 0.0,
            clock: EpisodeClock::new(),
        }
    }

    pub fn state(&self) -> (f64, f64) {
        (self.position, self.velocity)
    }

    pub fn set_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
    }
}

impl Env for SparseMountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed);
        self.position = rng.uniform(-0.6, -0.4);
        self.velocity = 0.0;
        self.clock.restart();
        vec![self.position, self.velocity]
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let (a, saturated) = self.clock.begin_step(&self.spec, action)?;
        let u = a[0];
        self.velocity = (self.velocity + POWER * u - GRAVITY * (3.0 * self.position).cos())
            .clamp(-MAX_SPEED, MAX_SPEED);
        self.position = (self.position + self.velocity).clamp(MIN_POSITION, MAX_POSITION);
        let done = self.position >= GOAL_POSITION;
        let mut reward = -ACTION_COST * u * u;
        if done {
            reward += GOAL_REWARD;
        }
        let truncated = self.clock.end_step(&self.spec, done);
        Ok(StepResult {
            next_obs: vec![self.position, self.velocity],
            reward,
            done,
            truncated,
            saturated,
        })
    }

    fn name(&self) -> &'static str {
        "sparse-mcar"
    }
}
