use crate::envs::EnvSpec;
use crate::neural::{polyak_update, Mlp, Rng};
use crate::replay::Batch;

use super::actors::ActorPair;
use super::config::{Aggregate, OparlConfig, SelectionCriterion, TargetRule};
use super::ensemble::{aggregate_row, concat_rows, member_variance, EnsembleCritic};
use super::OparlError;

/// Outcome of one critic regression step.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticUpdate {
    /// Each member's mean squared error before its step.
    pub losses: Vec<f64>,
    pub q_min_mean: f64,
    pub q_max_mean: f64,
    /// Mean over rows of the across-member standard deviation.
    pub ensemble_std_mean: f64,
}

impl CriticUpdate {
    pub fn mean_loss(&self) -> f64 {
        self.losses.iter().sum::<f64>() / self.losses.len() as f64
    }
}

/// Outcome of one actor step.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorUpdate {
    /// Loss of the optimistic actor; `None` when the variant has none.
    pub loss_opt: Option<f64>,
    /// Loss of the evaluated actor under the variant's objective.
    pub loss_pes: f64,
    /// `-mean max_i Q_i(s, pi(s))` for the actor that explores.
    pub explore_max_loss: f64,
    /// `-mean min_i Q_i(s, pi(s))` for the evaluated actor.
    pub exploit_min_loss: f64,
}

struct ActorPass {
    grad: Vec<f64>,
    loss: f64,
    max_loss: f64,
    min_loss: f64,
}

/// Ensemble critic plus actor pair, with the update rules of one variant.
#[derive(Debug, Clone)]
pub struct Agent {
    pub cfg: OparlConfig,
    pub critic: EnsembleCritic,
    pub actors: ActorPair,
    spec: EnvSpec,
    action_scale: f64,
}

fn check_finite(values: &[f64], what: &str) -> Result<(), OparlError> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(OparlError::non_finite(format!("{what}[{i}] = {}", values[i])));
    }
    Ok(())
}

fn batch_stats(batch: &Batch) -> String {
    let n = batch.rewards.len().max(1) as f64;
    let mean = batch.rewards.iter().sum::<f64>() / n;
    let lo = batch.rewards.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = batch.rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dones = batch.dones.iter().filter(|&&d| d).count();
    format!(
        "batch of {}: reward mean {mean:.6} min {lo:.6} max {hi:.6}, {dones} terminal rows",
        batch.size
    )
}

impl Agent {
    /// Builds fresh networks. `cfg` should already be [`OparlConfig::resolved`].
    pub fn new(spec: &EnvSpec, cfg: OparlConfig, rng: &mut Rng) -> Result<Self, OparlError> {
        cfg.validate()?;
        let scale = spec.action_scale();
        let critic = EnsembleCritic::new(
            spec.obs_dim,
            spec.action_dim,
            &cfg.hidden_sizes,
            cfg.activation,
            cfg.ensemble_size,
            cfg.lr_critic,
            rng,
        )?;
        let actors = ActorPair::new(
            spec.obs_dim,
            spec.action_dim,
            &cfg.hidden_sizes,
            cfg.activation,
            scale,
            cfg.lr_actor,
            rng,
        )?;
        Ok(Self::from_parts(spec, cfg, critic, actors))
    }

    /// Assembles an agent from existing networks (checkpoints, stubs).
    pub fn from_parts(spec: &EnvSpec, cfg: OparlConfig, critic: EnsembleCritic, actors: ActorPair) -> Self {
        Self {
            action_scale: spec.action_scale(),
            spec: spec.clone(),
            cfg,
            critic,
            actors,
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// The actor used for evaluation.
    pub fn evaluation_actor(&self) -> &Mlp {
        &self.actors.pi_pes
    }

    pub fn behavior_actor(&self, explore: bool) -> &Mlp {
        if explore && self.cfg.variant.has_explorer() {
            &self.actors.pi_opt
        } else {
            &self.actors.pi_pes
        }
    }

    fn check_state(&self, state: &[f64]) -> Result<(), OparlError> {
        if state.len() != self.spec.obs_dim {
            return Err(OparlError::Shape(format!(
                "state has length {}, expected {}",
                state.len(),
                self.spec.obs_dim
            )));
        }
        Ok(())
    }

    /// Noisy candidates `clip(pi_b(s) + eps_k)`, `eps_k ~ N(0, (sigma * scale)^2)`.
    pub fn behavior_candidates(
        &self,
        state: &[f64],
        explore: bool,
        rng: &mut Rng,
    ) -> Result<Vec<Vec<f64>>, OparlError> {
        self.check_state(state)?;
        if self.cfg.candidate_count < 1 {
            return Err(OparlError::Config("oparl.candidate_count: must be at least 1".into()));
        }
        let mean = self.behavior_actor(explore).forward(state)?;
        let std = self.cfg.exploration_noise * self.action_scale;
        Ok((0..self.cfg.candidate_count)
            .map(|_| {
                let mut a: Vec<f64> = mean.iter().map(|m| m + std * rng.normal()).collect();
                self.spec.clip_action(&mut a);
                a
            })
            .collect())
    }

    /// Score of each candidate under the configured criterion.
    pub fn candidate_scores(&self, state: &[f64], candidates: &[Vec<f64>]) -> Result<Vec<f64>, OparlError> {
        self.check_state(state)?;
        let k = candidates.len();
        let states: Vec<f64> = (0..k).flat_map(|_| state.iter().copied()).collect();
        let actions: Vec<f64> = candidates.concat();
        let q = self.critic.q_values(&states, &actions, k)?;
        Ok((0..k)
            .map(|row| match self.cfg.selection_criterion {
                SelectionCriterion::MaxQ => aggregate_row(&q, row, self.cfg.variant.selection_aggregate()).0,
                SelectionCriterion::MaxVariance => member_variance(&q, row),
            })
            .collect())
    }

    /// Picks the best-scoring noisy candidate; ties go to the lowest index.
    pub fn select_behavior_action(
        &self,
        state: &[f64],
        explore: bool,
        rng: &mut Rng,
    ) -> Result<Vec<f64>, OparlError> {
        let mut candidates = self.behavior_candidates(state, explore, rng)?;
        if candidates.len() == 1 {
            return Ok(candidates.pop().expect("one candidate"));
        }
        let scores = self.candidate_scores(state, &candidates)?;
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        Ok(candidates.swap_remove(best))
    }

    /// Smoothed target actions `clip(pi'_pes(s') + clip(noise))`.
    pub fn target_actions(&self, next_states: &[f64], batch: usize, rng: &mut Rng) -> Result<Vec<f64>, OparlError> {
        let trace = self.actors.pi_pes_target.forward_batch(next_states, batch)?;
        let std = self.cfg.target_noise * self.action_scale;
        let clip = self.cfg.target_noise_clip * self.action_scale;
        let mut out = trace.output().to_vec();
        for row in out.chunks_exact_mut(self.spec.action_dim) {
            for a in row.iter_mut() {
                let noise = (std * rng.normal()).clamp(-clip, clip);
                *a += noise;
            }
            self.spec.clip_action(row);
        }
        Ok(out)
    }

    /// Target-critic values `[member][row]` at `(s', a_tilde)`.
    pub fn target_member_values(
        &self,
        next_states: &[f64],
        target_actions: &[f64],
        batch: usize,
    ) -> Result<Vec<Vec<f64>>, OparlError> {
        Ok(self.critic.target_q_values(next_states, target_actions, batch)?)
    }

    /// Targets for `batch` under `rule`; `noise_rng` drives target smoothing,
    /// `member_rng` the random-member draw.
    pub fn compute_target(
        &self,
        batch: &Batch,
        rule: TargetRule,
        noise_rng: &mut Rng,
        member_rng: &mut Rng,
    ) -> Result<Vec<f64>, OparlError> {
        if batch.size == 0 {
            return Err(OparlError::Shape("target computation needs a nonempty batch".into()));
        }
        let a_tilde = self.target_actions(&batch.next_states, batch.size, noise_rng)?;
        let values = self.target_member_values(&batch.next_states, &a_tilde, batch.size)?;
        let y = bootstrap_targets(&batch.rewards, &batch.dones, &values, self.cfg.gamma, rule, member_rng);
        check_finite(&y, "critic target").map_err(|e| e.with_detail(batch_stats(batch)))?;
        Ok(y)
    }

    pub fn compute_target_pessimistic(&self, batch: &Batch, noise_rng: &mut Rng) -> Result<Vec<f64>, OparlError> {
        // the member stream is never drawn from for this rule
        self.compute_target(batch, TargetRule::Pessimistic, noise_rng, &mut Rng::new(0))
    }

    pub fn compute_target_optimistic(&self, batch: &Batch, noise_rng: &mut Rng) -> Result<Vec<f64>, OparlError> {
        self.compute_target(batch, TargetRule::Optimistic, noise_rng, &mut Rng::new(0))
    }

    pub fn compute_target_random_member(
        &self,
        batch: &Batch,
        noise_rng: &mut Rng,
        member_rng: &mut Rng,
    ) -> Result<Vec<f64>, OparlError> {
        self.compute_target(batch, TargetRule::RandomMember, noise_rng, member_rng)
    }

    /// One Adam step per member on the mean squared error toward `y`.
    pub fn update_critics(&mut self, batch: &Batch, y: &[f64]) -> Result<CriticUpdate, OparlError> {
        let b = batch.size;
        if y.len() != b {
            return Err(OparlError::Shape(format!("{} targets for a batch of {b}", y.len())));
        }
        let x = concat_rows(&batch.states, batch.obs_dim, &batch.actions, batch.action_dim);
        let mut losses = Vec::with_capacity(self.critic.len());
        let mut values = Vec::with_capacity(self.critic.len());
        let mut grad = vec![0.0; self.critic.critics[0].param_count()];
        for (member, (net, adam)) in self
            .critic
            .critics
            .iter_mut()
            .zip(self.critic.adam.iter_mut())
            .enumerate()
        {
            let trace = net.forward_batch(&x, b)?;
            let q = trace.output();
            let mut loss = 0.0;
            let out_grad: Vec<f64> = q
                .iter()
                .zip(y)
                .map(|(&qi, &yi)| {
                    let d = qi - yi;
                    loss += d * d;
                    2.0 * d / b as f64
                })
                .collect();
            loss /= b as f64;
            if !loss.is_finite() {
                return Err(OparlError::non_finite(format!("critic {member} loss {loss}"))
                    .with_detail(batch_stats(batch)));
            }
            grad.resize(net.param_count(), 0.0);
            net.backward_batch(&trace, &out_grad, Some(&mut grad), None)?;
            adam.apply(net.params_mut(), &grad)?;
            losses.push(loss);
            values.push(q.to_vec());
        }

        let (mut qmin, mut qmax, mut std) = (0.0, 0.0, 0.0);
        for row in 0..b {
            qmin += aggregate_row(&values, row, Aggregate::Min).0;
            qmax += aggregate_row(&values, row, Aggregate::Max).0;
            std += member_variance(&values, row).sqrt();
        }
        Ok(CriticUpdate {
            losses,
            q_min_mean: qmin / b as f64,
            q_max_mean: qmax / b as f64,
            ensemble_std_mean: std / b as f64,
        })
    }

    /// Gradient of `-mean_s agg_i Q_i(s, actor(s))` with respect to the
    /// actor's parameters. Critics are only read.
    fn actor_pass(&self, actor: &Mlp, states: &[f64], b: usize, agg: Aggregate) -> Result<ActorPass, OparlError> {
        let (obs_dim, act_dim) = (self.spec.obs_dim, self.spec.action_dim);
        let actor_trace = actor.forward_batch(states, b)?;
        let x = concat_rows(states, obs_dim, actor_trace.output(), act_dim);
        let traces = self
            .critic
            .critics
            .iter()
            .map(|c| c.forward_batch(&x, b))
            .collect::<Result<Vec<_>, _>>()?;
        let values: Vec<Vec<f64>> = traces.iter().map(|t| t.output().to_vec()).collect();
        let n = values.len();

        let mut out_grads = vec![vec![0.0; b]; n];
        let (mut loss, mut max_sum, mut min_sum) = (0.0, 0.0, 0.0);
        let inv_b = 1.0 / b as f64;
        for row in 0..b {
            let (v, idx) = aggregate_row(&values, row, agg);
            loss -= v;
            max_sum += aggregate_row(&values, row, Aggregate::Max).0;
            min_sum += aggregate_row(&values, row, Aggregate::Min).0;
            match agg {
                Aggregate::Min | Aggregate::Max => out_grads[idx][row] = -inv_b,
                Aggregate::Mean => {
                    let g = -inv_b / n as f64;
                    out_grads.iter_mut().for_each(|og| og[row] = g);
                }
            }
        }
        let loss = loss * inv_b;
        if !loss.is_finite() {
            return Err(OparlError::non_finite(format!("actor loss {loss}")));
        }

        let in_dim = obs_dim + act_dim;
        let mut action_grad = vec![0.0; b * act_dim];
        let mut input_grad = vec![0.0; b * in_dim];
        for ((critic, trace), og) in self.critic.critics.iter().zip(&traces).zip(&out_grads) {
            if og.iter().all(|&g| g == 0.0) {
                continue;
            }
            critic.backward_batch(trace, og, None, Some(&mut input_grad))?;
            for (acc, row) in action_grad.chunks_exact_mut(act_dim).zip(input_grad.chunks_exact(in_dim)) {
                for (a, g) in acc.iter_mut().zip(&row[obs_dim..]) {
                    *a += g;
                }
            }
        }
        let mut grad = vec![0.0; actor.param_count()];
        actor.backward_batch(&actor_trace, &action_grad, Some(&mut grad), None)?;
        Ok(ActorPass {
            grad,
            loss,
            max_loss: -max_sum * inv_b,
            min_loss: -min_sum * inv_b,
        })
    }

    /// Deterministic policy-gradient step for the actor(s) of this variant.
    pub fn update_actors(&mut self, batch: &Batch) -> Result<ActorUpdate, OparlError> {
        let variant = self.cfg.variant;
        let pes = self.actor_pass(
            &self.actors.pi_pes,
            &batch.states,
            batch.size,
            variant.exploit_objective(),
        )?;
        let opt = if variant.has_explorer() {
            Some(self.actor_pass(&self.actors.pi_opt, &batch.states, batch.size, Aggregate::Max)?)
        } else {
            None
        };

        self.actors.adam_pes.apply(self.actors.pi_pes.params_mut(), &pes.grad)?;
        if let Some(o) = &opt {
            self.actors.adam_opt.apply(self.actors.pi_opt.params_mut(), &o.grad)?;
        }
        Ok(ActorUpdate {
            loss_opt: opt.as_ref().map(|o| o.loss),
            loss_pes: pes.loss,
            explore_max_loss: opt.as_ref().map_or(pes.max_loss, |o| o.max_loss),
            exploit_min_loss: pes.min_loss,
        })
    }

    /// Polyak step for every critic target and the pessimistic actor target.
    pub fn soft_update_targets(&mut self) -> Result<(), OparlError> {
        let tau = self.cfg.tau;
        for (t, c) in self.critic.targets.iter_mut().zip(&self.critic.critics) {
            polyak_update(t, c, tau)?;
        }
        polyak_update(&mut self.actors.pi_pes_target, &self.actors.pi_pes, tau)?;
        Ok(())
    }

    /// Copies parameters between the actors in the configured direction.
    pub fn reset_parameters(&mut self) -> Result<(), OparlError> {
        self.actors.reset(self.cfg.reset_direction)?;
        Ok(())
    }
}

/// `y = r + gamma * (1 - done) * v`, with `v` the per-row member statistic
/// selected by `rule`. Random-member draws consume one value per row.
pub fn bootstrap_targets(
    rewards: &[f64],
    dones: &[bool],
    member_values: &[Vec<f64>],
    gamma: f64,
    rule: TargetRule,
    member_rng: &mut Rng,
) -> Vec<f64> {
    let n = member_values.len();
    rewards
        .iter()
        .zip(dones)
        .enumerate()
        .map(|(row, (&r, &done))| {
            let v = match rule {
                TargetRule::Pessimistic => aggregate_row(member_values, row, Aggregate::Min).0,
                TargetRule::Optimistic => aggregate_row(member_values, row, Aggregate::Max).0,
                TargetRule::RandomMember => member_values[member_rng.below(n)][row],
            };
            if done {
                r
            } else {
                r + gamma * v
            }
        })
        .collect()
}
