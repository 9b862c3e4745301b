//! Deterministic continuous-control tasks.
//!
//! | name          | obs                  | action      | reward                       |
//! |---------------|----------------------|-------------|------------------------------|
//! | `pointmass`   | (x, y, vx, vy)       | [-1, 1]^2   | dense, -distance to (1, 1)   |
//! | `pendulum`    | (cos t, sin t, t')   | [-2, 2]     | dense, swing-up cost         |
//! | `sparse-mcar` | (position, velocity) | [-1, 1]     | +100 at the flag, else ~0    |
//!
//! Actions are clipped into range inside `step`; a clipped step reports
//! `saturated == true`.

mod mountain_car;
mod pendulum;
mod point_mass;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use mountain_car::SparseMountainCar;
pub use pendulum::PendulumSwingUp;
pub use point_mass::PointMass2D;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("episode is over; call reset before stepping again")]
    EpisodeOver,
    #[error("action has length {actual}, expected {expected}")]
    ActionShape { expected: usize, actual: usize },
    #[error("action component {index} is not finite")]
    NonFiniteAction { index: usize },
    #[error("unknown environment '{0}' (expected pointmass, pendulum or sparse-mcar)")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    /// Largest absolute action bound; the actor output scale.
    pub fn action_scale(&self) -> f64 {
        self.action_low
            .iter()
            .chain(&self.action_high)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn clip_action(&self, action: &mut [f64]) -> bool {
        let mut saturated = false;
        for ((a, &lo), &hi) in action.iter_mut().zip(&self.action_low).zip(&self.action_high) {
            let c = a.clamp(lo, hi);
            saturated |= c != *a;
            *a = c;
        }
        saturated
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_obs: Vec<f64>,
    pub reward: f64,
    /// Terminal by the environment's own rule.
    pub done: bool,
    /// Cut off by the step limit only.
    pub truncated: bool,
    /// The action was clipped into range.
    pub saturated: bool,
}

impl StepResult {
    pub fn episode_over(&self) -> bool {
        self.done || self.truncated
    }
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode drawn from the initial-state distribution.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;

    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvKind {
    PointMass,
    Pendulum,
    SparseMountainCar,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::PointMass, EnvKind::Pendulum, EnvKind::SparseMountainCar];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::PointMass => "pointmass",
            EnvKind::Pendulum => "pendulum",
            EnvKind::SparseMountainCar => "sparse-mcar",
        }
    }

    pub fn make(self) -> Box<dyn Env> {
        match self {
            EnvKind::PointMass => Box::new(PointMass2D::new()),
            EnvKind::Pendulum => Box::new(PendulumSwingUp::new()),
            EnvKind::SparseMountainCar => Box::new(SparseMountainCar::new()),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| EnvError::Unknown(s.to_string()))
    }
}

/// Shared step bookkeeping: shape checks, clipping and the episode limit.
#[derive(Debug, Clone)]
struct EpisodeClock {
    steps: usize,
    over: bool,
}

impl EpisodeClock {
    fn new() -> Self {
        // Not stepped until the first reset.
        Self { steps: 0, over: true }
    }

    fn restart(&mut self) {
        self.steps = 0;
        self.over = false;
    }

    fn begin_step(&mut self, spec: &EnvSpec, action: &[f64]) -> Result<(Vec<f64>, bool), EnvError> {
        if self.over {
            return Err(EnvError::EpisodeOver);
        }
        if action.len() != spec.action_dim {
            return Err(EnvError::ActionShape {
                expected: spec.action_dim,
                actual: action.len(),
            });
        }
        if let Some(index) = action.iter().position(|a| !a.is_finite()) {
            return Err(EnvError::NonFiniteAction { index });
        }
        let mut a = action.to_vec();
        let saturated = spec.clip_action(&mut a);
        Ok((a, saturated))
    }

    /// Returns `truncated`.
    fn end_step(&mut self, spec: &EnvSpec, done: bool) -> bool {
        self.steps += 1;
        let truncated = !done && self.steps >= spec.max_episode_steps;
        self.over = done || truncated;
        truncated
    }
}
