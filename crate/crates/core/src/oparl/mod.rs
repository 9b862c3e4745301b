//! The dual-actor agent: ensemble critic, optimistic and pessimistic
//! actors, target computation, updates, parameter resets, the training loop
//! and evaluation.

mod actors;
mod agent;
mod checkpoint;
mod config;
mod ensemble;
mod train;

pub use actors::ActorPair;
pub use agent::{bootstrap_targets, ActorUpdate, Agent, CriticUpdate};
pub use checkpoint::{Checkpoint, CheckpointNetworks, CHECKPOINT_FORMAT_VERSION};
pub use config::{
    Aggregate, Alternation, BehaviorRatio, OparlConfig, ResetDirection, SelectionCriterion, TargetRule,
    Variant,
};
pub use ensemble::{aggregate_row, concat_rows, member_variance, EnsembleCritic};
pub use train::{evaluate, EvalReport, MetricsSink, RecordKind, RunMetrics, RunSettings, TrainState, Trainer};

use thiserror::Error;

use crate::envs::EnvError;
use crate::neural::NeuralError;
use crate::replay::ReplayError;

#[derive(Debug, Error)]
pub enum OparlError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value{}: {detail}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NonFinite { step: Option<u64>, detail: String },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("metrics sink failed: {0}")]
    Sink(#[from] std::io::Error),
}

impl OparlError {
    pub fn non_finite(detail: impl Into<String>) -> Self {
        OparlError::NonFinite {
            step: None,
            detail: detail.into(),
        }
    }

    pub fn with_detail(self, extra: String) -> Self {
        match self {
            OparlError::NonFinite { step, detail } => OparlError::NonFinite {
                step,
                detail: format!("{detail}; {extra}"),
            },
            other => other,
        }
    }

    pub fn at_step(self, at: u64) -> Self {
        match self {
            OparlError::NonFinite { step: None, detail } => OparlError::NonFinite {
                step: Some(at),
                detail,
            },
            other => other,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, OparlError::NonFinite { .. })
    }
}
