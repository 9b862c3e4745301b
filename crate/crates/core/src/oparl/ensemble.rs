use crate::neural::{Activation, AdamState, Mlp, NeuralError, OutputTransform, Rng};

use super::config::Aggregate;

/// `N` critics `Q_i(s, a)` with their Polyak-tracked targets and optimizers.
#[derive(Debug, Clone)]
pub struct EnsembleCritic {
    pub critics: Vec<Mlp>,
    pub targets: Vec<Mlp>,
    pub adam: Vec<AdamState>,
    obs_dim: usize,
    action_dim: usize,
}

/// Row-major `[state | action]` rows for critic input.
pub fn concat_rows(states: &[f64], obs_dim: usize, actions: &[f64], action_dim: usize) -> Vec<f64> {
    let rows = states.len() / obs_dim.max(1);
    let mut x = Vec::with_capacity(rows * (obs_dim + action_dim));
    for (s, a) in states.chunks_exact(obs_dim).zip(actions.chunks_exact(action_dim)) {
        x.extend_from_slice(s);
        x.extend_from_slice(a);
    }
    x
}

/// Collapses member values at one row; returns the value and, for min/max,
/// the lowest member index attaining it.
pub fn aggregate_row(values: &[Vec<f64>], row: usize, agg: Aggregate) -> (f64, usize) {
    match agg {
        Aggregate::Min => {
            let mut best = (values[0][row], 0);
            for (i, v) in values.iter().enumerate().skip(1) {
                if v[row] < best.0 {
                    best = (v[row], i);
                }
            }
            best
        }
        Aggregate::Max => {
            let mut best = (values[0][row], 0);
            for (i, v) in values.iter().enumerate().skip(1) {
                if v[row] > best.0 {
                    best = (v[row], i);
                }
            }
            best
        }
        Aggregate::Mean => {
            let sum: f64 = values.iter().map(|v| v[row]).sum();
            (sum / values.len() as f64, 0)
        }
    }
}

/// Population variance across members, computed from pairwise differences
/// so that identical members give exactly zero.
pub fn member_variance(values: &[Vec<f64>], row: usize) -> f64 {
    let n = values.len() as f64;
    let mut acc = 0.0;
    for a in values {
        for b in values {
            let d = a[row] - b[row];
            acc += d * d;
        }
    }
    acc / (2.0 * n * n)
}

impl EnsembleCritic {
    pub fn new(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        members: usize,
        lr: f64,
        rng: &mut Rng,
    ) -> Result<Self, NeuralError> {
        let mut sizes = vec![obs_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let critics = (0..members)
            .map(|_| Mlp::init(&sizes, activation, OutputTransform::Identity, rng))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_critics(critics, obs_dim, action_dim, lr)
    }

    /// Wraps existing critics; targets start as exact copies.
    pub fn from_critics(
        critics: Vec<Mlp>,
        obs_dim: usize,
        action_dim: usize,
        lr: f64,
    ) -> Result<Self, NeuralError> {
        if critics.is_empty() {
            return Err(NeuralError::InvalidArgument("ensemble needs at least one critic".into()));
        }
        for c in &critics {
            if c.input_dim() != obs_dim + action_dim || c.output_dim() != 1 {
                return Err(NeuralError::Architecture(format!(
                    "critic {:?} does not map {}+{} inputs to one value",
                    c.layer_sizes(),
                    obs_dim,
                    action_dim
                )));
            }
        }
        let adam = critics.iter().map(|c| AdamState::new(c.param_count(), lr)).collect();
        Ok(Self {
            targets: critics.clone(),
            critics,
            adam,
            obs_dim,
            action_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.critics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.critics.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Per-member values `[member][row]` of `nets` at `(states, actions)`.
    pub fn evaluate(
        nets: &[Mlp],
        states: &[f64],
        obs_dim: usize,
        actions: &[f64],
        action_dim: usize,
        batch: usize,
    ) -> Result<Vec<Vec<f64>>, NeuralError> {
        let x = concat_rows(states, obs_dim, actions, action_dim);
        nets.iter()
            .map(|n| n.forward_batch(&x, batch).map(|t| t.output().to_vec()))
            .collect()
    }

    pub fn q_values(&self, states: &[f64], actions: &[f64], batch: usize) -> Result<Vec<Vec<f64>>, NeuralError> {
        Self::evaluate(&self.critics, states, self.obs_dim, actions, self.action_dim, batch)
    }

    pub fn target_q_values(
        &self,
        states: &[f64],
        actions: &[f64],
        batch: usize,
    ) -> Result<Vec<Vec<f64>>, NeuralError> {
        Self::evaluate(&self.targets, states, self.obs_dim, actions, self.action_dim, batch)
    }
}
