//! Optimistic/pessimistic dual-actor reinforcement learning over an ensemble
//! critic.
//!
//! An optimistic actor, trained against the ensemble maximum, drives
//! exploration; a pessimistic actor, trained against the ensemble minimum,
//! is the policy that gets evaluated. Parameters are periodically copied
//! from one actor into the other.
//!
//! Modules:
//! - [`neural`]: MLPs, gradients, Adam, target-network updates.
//! - [`replay`]: fixed-capacity transition store.
//! - [`envs`]: deterministic continuous-control tasks.
//! - [`oparl`]: the agent, its ablation variants and the training loop.
//! - [`harness`]: run configuration, output files, comparison and sweeps.

pub mod envs;
pub mod harness;
pub mod neural;
pub mod oparl;
pub mod replay;
