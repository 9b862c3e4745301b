//! Fixed-capacity FIFO experience store with uniform sampling.

use thiserror::Error;

use crate::neural::Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("cannot sample from an empty replay buffer")]
    Empty,
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("transition {field} has length {actual}, expected {expected}")]
    Shape {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("transition reward is not finite: {0}")]
    NonFiniteReward(f64),
}

/// One environment interaction. `done` marks true termination only; a
/// time-limit cutoff is stored with `done == false` so it still bootstraps.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Column-major view of a sampled minibatch, row-major inside each field.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(rows: &[&Transition], obs_dim: usize, action_dim: usize) -> Self {
        let mut b = Batch {
            size: rows.len(),
            obs_dim,
            action_dim,
            states: Vec::with_capacity(rows.len() * obs_dim),
            actions: Vec::with_capacity(rows.len() * action_dim),
            rewards: Vec::with_capacity(rows.len()),
            next_states: Vec::with_capacity(rows.len() * obs_dim),
            dones: Vec::with_capacity(rows.len()),
        };
        for t in rows {
            b.states.extend_from_slice(&t.state);
            b.actions.extend_from_slice(&t.action);
            b.rewards.push(t.reward);
            b.next_states.extend_from_slice(&t.next_state);
            b.dones.push(t.done);
        }
        b
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    storage: Vec<Transition>,
    write_cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Result<Self, ReplayError> {
        if capacity == 0 {
            return Err(ReplayError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            obs_dim,
            action_dim,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            write_cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Stored transition at slot `i` (slot order, not insertion order).
    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.storage.get(i)
    }

    /// Contents from oldest to newest.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.write_cursor
        };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }

    pub fn push(&mut self, t: Transition) -> Result<(), ReplayError> {
        let check = |field, expected: usize, actual: usize| {
            if expected == actual {
                Ok(())
            } else {
                Err(ReplayError::Shape {
                    field,
                    expected,
                    actual,
                })
            }
        };
        check("state", self.obs_dim, t.state.len())?;
        check("next_state", self.obs_dim, t.next_state.len())?;
        check("action", self.action_dim, t.action.len())?;
        if !t.reward.is_finite() {
            return Err(ReplayError::NonFiniteReward(t.reward));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write_cursor] = t;
        }
        self.write_cursor = (self.write_cursor + 1) % self.capacity;
        Ok(())
    }

    /// Uniform indices with replacement over the current contents.
    pub fn sample_indices(&self, batch_size: usize, rng: &mut Rng) -> Result<Vec<usize>, ReplayError> {
        if self.storage.is_empty() {
            return Err(ReplayError::Empty);
        }
        if batch_size == 0 {
            return Err(ReplayError::ZeroBatch);
        }
        let n = self.storage.len();
        Ok((0..batch_size).map(|_| rng.below(n)).collect())
    }

    pub fn sample(&self, batch_size: usize, rng: &mut Rng) -> Result<Vec<&Transition>, ReplayError> {
        Ok(self
            .sample_indices(batch_size, rng)?
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }

    pub fn sample_batch(&self, batch_size: usize, rng: &mut Rng) -> Result<Batch, ReplayError> {
        let rows = self.sample(batch_size, rng)?;
        Ok(Batch::from_transitions(&rows, self.obs_dim, self.action_dim))
    }
}
