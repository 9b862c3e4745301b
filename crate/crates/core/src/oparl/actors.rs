use crate::neural::{hard_copy, Activation, AdamState, Mlp, NeuralError, OutputTransform, Rng};

use super::config::ResetDirection;

/// Optimistic and pessimistic actors plus the pessimistic target.
///
/// Single-actor ablations use the `pi_pes` slot as their only actor and
/// leave `pi_opt` untouched.
#[derive(Debug, Clone)]
pub struct ActorPair {
    pub pi_opt: Mlp,
    pub pi_pes: Mlp,
    pub pi_pes_target: Mlp,
    pub adam_opt: AdamState,
    pub adam_pes: AdamState,
}

impl ActorPair {
    /// Both actors and the target start from the same random draw.
    pub fn new(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        action_scale: f64,
        lr: f64,
        rng: &mut Rng,
    ) -> Result<Self, NeuralError> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        let pi_pes = Mlp::init(
            &sizes,
            activation,
            OutputTransform::Bounded { scale: action_scale },
            rng,
        )?;
        Ok(Self::from_actor(pi_pes, lr))
    }

    pub fn from_actor(actor: Mlp, lr: f64) -> Self {
        let n = actor.param_count();
        Self {
            pi_opt: actor.clone(),
            pi_pes_target: actor.clone(),
            pi_pes: actor,
            adam_opt: AdamState::new(n, lr),
            adam_pes: AdamState::new(n, lr),
        }
    }

    /// Hard parameter copy between the two actors. Targets and optimizer
    /// state are not touched.
    pub fn reset(&mut self, direction: ResetDirection) -> Result<(), NeuralError> {
        match direction {
            ResetDirection::PesToOpt => hard_copy(&mut self.pi_opt, &self.pi_pes),
            ResetDirection::OptToPes => hard_copy(&mut self.pi_pes, &self.pi_opt),
        }
    }
}
