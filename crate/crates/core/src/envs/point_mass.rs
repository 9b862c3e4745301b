use super::{EnvError, EnvSpec, EpisodeClock, Env, StepResult};
use crate::neural::Rng;

const GOAL: [f64; 2] = [1.0, 1.0];
const GOAL_RADIUS: f64 = 0.1;
const GOAL_BONUS: f64 = 10.0;
const DAMPING: f64 = 0.95;
const FORCE_GAIN: f64 = 0.1;
const START_HALF_WIDTH: f64 = 0.1;

/// Damped 2-D point mass steered towards (1, 1).
///
/// `v <- 0.95 v + 0.1 a`, `p <- p + v`; reward `-|p - goal|` each step, plus
/// 10 and termination once within 0.1 of the goal. Starts uniformly in
/// `[-0.1, 0.1]^2` at rest; 200 steps.
#[derive(Debug, Clone)]
pub struct PointMass2D {
    spec: EnvSpec,
    pos: [f64; 2],
    vel: [f64; 2],
    clock: EpisodeClock,
}

impl Default for PointMass2D {
    fn default() -> Self {
        Self::new()
    }
}

impl PointMass2D {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                obs_dim: 4,
                action_dim: 2,
                action_low: vec![-1.0; 2],
                action_high: vec![1.0; 2],
                max_episode_steps: 200,
            },
            pos: [0.0; 2],
            vel: [0.0; 2],
            clock: EpisodeClock::new(),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    pub fn velocity(&self) -> [f64; 2] {
        self.vel
    }

    /// Overrides the physical state inside the current episode.
    pub fn set_state(&mut self, pos: [f64; 2], vel: [f64; 2]) {
        self.pos = pos;
        self.vel = vel;
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }
}

impl Env for PointMass2D {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed);
        self.pos = [
            rng.uniform(-START_HALF_WIDTH, START_HALF_WIDTH),
            rng.uniform(-START_HALF_WIDTH, START_HALF_WIDTH),
        ];
        self.vel = [0.0; 2];
        self.clock.restart();
        self.obs()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let (a, saturated) = self.clock.begin_step(&self.spec, action)?;
        for ((v, p), f) in self.vel.iter_mut().zip(&mut self.pos).zip(&a) {
            *v = DAMPING * *v + FORCE_GAIN * f;
            *p += *v;
        }
        let dist = (self.pos[0] - GOAL[0]).hypot(self.pos[1] - GOAL[1]);
        let done = dist <= GOAL_RADIUS;
        let mut reward = -dist;
        if done {
            reward += GOAL_BONUS;
        }
        let truncated = self.clock.end_step(&self.spec, done);
        Ok(StepResult {
            next_obs: self.obs(),
            reward,
            done,
            truncated,
            saturated,
        })
    }

    fn name(&self) -> &'static str {
        "pointmass"
    }
}
