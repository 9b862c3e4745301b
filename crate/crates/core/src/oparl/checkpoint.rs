use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::envs::EnvSpec;
use crate::neural::{Mlp, SnapshotDocument};

use super::{Agent, OparlError};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointNetworks {
    pub pi_opt: SnapshotDocument,
    pub pi_pes: SnapshotDocument,
    pub pi_pes_target: SnapshotDocument,
    pub critics: Vec<SnapshotDocument>,
    pub critic_targets: Vec<SnapshotDocument>,
}

/// Every network of an agent, with the resolved run configuration echoed
/// as flat key/value pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub env: String,
    pub step: u64,
    pub config: BTreeMap<String, String>,
    pub networks: CheckpointNetworks,
}

impl Checkpoint {
    pub fn from_agent(agent: &Agent, env: &str, step: u64, config: BTreeMap<String, String>) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            env: env.to_string(),
            step,
            config,
            networks: CheckpointNetworks {
                pi_opt: agent.actors.pi_opt.to_document(),
                pi_pes: agent.actors.pi_pes.to_document(),
                pi_pes_target: agent.actors.pi_pes_target.to_document(),
                critics: agent.critic.critics.iter().map(Mlp::to_document).collect(),
                critic_targets: agent.critic.targets.iter().map(Mlp::to_document).collect(),
            },
        }
    }

    pub fn to_json(&self) -> Result<String, OparlError> {
        let all = [&self.networks.pi_opt, &self.networks.pi_pes, &self.networks.pi_pes_target]
            .into_iter()
            .chain(&self.networks.critics)
            .chain(&self.networks.critic_targets);
        for doc in all {
            if doc.params.iter().any(|p| !p.is_finite()) {
                return Err(OparlError::Checkpoint("network holds non-finite parameters".into()));
            }
        }
        serde_json::to_string(self).map_err(|e| OparlError::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, OparlError> {
        // Check the version before the full schema so old files fail clearly.
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| OparlError::Checkpoint(format!("not a checkpoint: {e}")))?;
        match raw.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(CHECKPOINT_FORMAT_VERSION) => {}
            Some(v) => {
                return Err(OparlError::Checkpoint(format!(
                    "unsupported checkpoint format_version {v} (expected {CHECKPOINT_FORMAT_VERSION})"
                )))
            }
            None => return Err(OparlError::Checkpoint("missing format_version".into())),
        }
        serde_json::from_value(raw).map_err(|e| OparlError::Checkpoint(e.to_string()))
    }

    /// The evaluated actor, checked against the environment's dimensions.
    pub fn evaluation_actor(&self, spec: &EnvSpec) -> Result<Mlp, OparlError> {
        let actor = Mlp::from_document(&self.networks.pi_pes)?;
        if actor.input_dim() != spec.obs_dim || actor.output_dim() != spec.action_dim {
            return Err(OparlError::Shape(format!(
                "checkpoint actor maps {} -> {}, environment needs {} -> {}",
                actor.input_dim(),
                actor.output_dim(),
                spec.obs_dim,
                spec.action_dim
            )));
        }
        Ok(actor)
    }
}
