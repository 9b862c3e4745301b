use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::envs::{Env, EnvKind};
use crate::neural::{Mlp, Rng};
use crate::replay::{ReplayBuffer, Transition};

use super::agent::{ActorUpdate, Agent, CriticUpdate};
use super::config::{Alternation, OparlConfig};
use super::OparlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Episode,
    Eval,
    Reset,
}

/// One line of the metrics stream.
///
/// Episode records aggregate the updates made during that episode; fields
/// with nothing to aggregate are `null`. `actor_opt_loss` is
/// `-mean max_i Q_i` for the exploring actor and `actor_pes_loss` is
/// `-mean min_i Q_i` for the evaluated actor; single-actor variants report
/// both for their one actor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetrics {
    pub kind: RecordKind,
    pub step: u64,
    pub episode: u64,
    pub episodic_return: Option<f64>,
    pub eval_return_mean: Option<f64>,
    pub eval_success_rate: Option<f64>,
    pub critic_loss_mean: Option<f64>,
    pub q_min_mean: Option<f64>,
    pub q_max_mean: Option<f64>,
    pub ensemble_std_mean: Option<f64>,
    pub actor_opt_loss: Option<f64>,
    pub actor_pes_loss: Option<f64>,
    pub reset_event: bool,
    pub wall_ms: u64,
}

impl RunMetrics {
    fn blank(kind: RecordKind, step: u64, episode: u64, wall_ms: u64) -> Self {
        Self {
            kind,
            step,
            episode,
            episodic_return: None,
            eval_return_mean: None,
            eval_success_rate: None,
            critic_loss_mean: None,
            q_min_mean: None,
            q_max_mean: None,
            ensemble_std_mean: None,
            actor_opt_loss: None,
            actor_pes_loss: None,
            reset_event: false,
            wall_ms,
        }
    }
}

pub trait MetricsSink {
    fn record(&mut self, m: &RunMetrics) -> std::io::Result<()>;
}

impl MetricsSink for Vec<RunMetrics> {
    fn record(&mut self, m: &RunMetrics) -> std::io::Result<()> {
        self.push(m.clone());
        Ok(())
    }
}

/// Run length and evaluation schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub total_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            total_steps: 30_000,
            eval_interval: 5_000,
            eval_episodes: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainState {
    pub env_steps: u64,
    pub grad_steps: u64,
    pub episode: u64,
    pub resets: u64,
}

/// Undiscounted evaluation returns.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub returns: Vec<f64>,
    /// Episode ended by the environment's terminal rule.
    pub successes: Vec<bool>,
}

impl EvalReport {
    pub fn mean(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len() as f64
    }

    /// Sample standard deviation; 0 for a single episode.
    pub fn std(&self) -> f64 {
        let n = self.returns.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.returns.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn success_rate(&self) -> f64 {
        self.successes.iter().filter(|&&s| s).count() as f64 / self.successes.len() as f64
    }
}

/// Runs `actor` without noise on `episodes` fresh episodes seeded from `seed`.
pub fn evaluate(env: &mut dyn Env, actor: &Mlp, episodes: usize, seed: u64) -> Result<EvalReport, OparlError> {
    if episodes == 0 {
        return Err(OparlError::Config("evaluation needs at least one episode".into()));
    }
    let root = Rng::new(seed);
    let mut report = EvalReport {
        returns: Vec::with_capacity(episodes),
        successes: Vec::with_capacity(episodes),
    };
    for k in 0..episodes {
        let mut obs = env.reset(rand::RngCore::next_u64(&mut root.split_index("eval-episode", k as u64)));
        let mut ret = 0.0;
        let mut success = false;
        loop {
            let action = actor.forward(&obs)?;
            let r = env.step(&action)?;
            ret += r.reward;
            if r.done {
                success = true;
            }
            if r.episode_over() {
                break;
            }
            obs = r.next_obs;
        }
        report.returns.push(ret);
        report.successes.push(success);
    }
    Ok(report)
}

#[derive(Debug, Default, Clone)]
struct Mean {
    sum: f64,
    n: u64,
}

impl Mean {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn get(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

#[derive(Debug, Default, Clone)]
struct EpisodeStats {
    critic_loss: Mean,
    q_min: Mean,
    q_max: Mean,
    ensemble_std: Mean,
    actor_opt: Mean,
    actor_pes: Mean,
}

impl EpisodeStats {
    fn add_critic(&mut self, c: &CriticUpdate) {
        self.critic_loss.add(c.mean_loss());
        self.q_min.add(c.q_min_mean);
        self.q_max.add(c.q_max_mean);
        self.ensemble_std.add(c.ensemble_std_mean);
    }

    fn add_actor(&mut self, a: &ActorUpdate) {
        self.actor_opt.add(a.explore_max_loss);
        self.actor_pes.add(a.exploit_min_loss);
    }
}

/// Collect/train loop for one seeded run.
pub struct Trainer {
    env: Box<dyn Env>,
    eval_env: Box<dyn Env>,
    agent: Agent,
    buffer: ReplayBuffer,
    settings: RunSettings,
    state: TrainState,
    root: Rng,
    behavior_rng: Rng,
    target_rng: Rng,
    sampling_rng: Rng,
    member_rng: Rng,
    eval_seed: u64,
    obs: Option<Vec<f64>>,
    episode_return: f64,
    stats: EpisodeStats,
    last_eval: Option<EvalReport>,
    started: Instant,
}

impl Trainer {
    pub fn new(env: EnvKind, cfg: OparlConfig, settings: RunSettings) -> Result<Self, OparlError> {
        let cfg = cfg.resolved()?;
        if settings.eval_interval == 0 || settings.eval_episodes == 0 {
            return Err(OparlError::Config(
                "run.eval_interval and run.eval_episodes must be positive".into(),
            ));
        }
        let train_env = env.make();
        let spec = train_env.spec().clone();
        let root = Rng::new(settings.seed);
        let agent = Agent::new(&spec, cfg.clone(), &mut root.split("init"))?;
        let buffer = ReplayBuffer::new(cfg.buffer_capacity, spec.obs_dim, spec.action_dim)?;
        let eval_seed = rand::RngCore::next_u64(&mut root.split("eval"));
        Ok(Self {
            env: train_env,
            eval_env: env.make(),
            agent,
            buffer,
            state: TrainState::default(),
            behavior_rng: root.split("behavior"),
            target_rng: root.split("target-noise"),
            sampling_rng: root.split("sampling"),
            member_rng: root.split("member"),
            root,
            eval_seed,
            settings,
            obs: None,
            episode_return: 0.0,
            stats: EpisodeStats::default(),
            last_eval: None,
            started: Instant::now(),
        })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut Agent {
        &mut self.agent
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn settings(&self) -> &RunSettings {
        &self.settings
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn last_eval(&self) -> Option<&EvalReport> {
        self.last_eval.as_ref()
    }

    /// Evaluates the current evaluation actor on this run's fixed episodes.
    pub fn evaluate_now(&mut self) -> Result<EvalReport, OparlError> {
        evaluate(
            self.eval_env.as_mut(),
            self.agent.evaluation_actor(),
            self.settings.eval_episodes,
            self.eval_seed,
        )
    }

    pub fn is_finished(&self) -> bool {
        self.state.env_steps >= self.settings.total_steps
    }

    fn wall_ms(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }

    fn uses_explorer(&self) -> bool {
        let cfg = &self.agent.cfg;
        let slot = match cfg.behavior_alternation {
            Alternation::Episode => self.state.episode,
            Alternation::Step => self.state.env_steps,
        };
        cfg.behavior_ratio.is_optimistic(slot)
    }

    fn warmup_action(&mut self) -> Vec<f64> {
        let spec = self.agent.spec();
        spec.action_low
            .iter()
            .zip(&spec.action_high)
            .map(|(&lo, &hi)| self.behavior_rng.uniform(lo, hi))
            .collect()
    }

    fn learn(&mut self) -> Result<(), OparlError> {
        let cfg = &self.agent.cfg;
        let (batch_size, rule, delay) = (cfg.batch_size, cfg.variant.target_rule(), cfg.policy_delay);
        let batch = self.buffer.sample_batch(batch_size, &mut self.sampling_rng)?;
        let y = self
            .agent
            .compute_target(&batch, rule, &mut self.target_rng, &mut self.member_rng)?;
        let critic = self.agent.update_critics(&batch, &y)?;
        self.stats.add_critic(&critic);
        self.state.grad_steps += 1;
        if self.state.grad_steps.is_multiple_of(delay) {
            let actor = self.agent.update_actors(&batch)?;
            self.stats.add_actor(&actor);
            self.agent.soft_update_targets()?;
        }
        Ok(())
    }

    /// Advances one environment step. Returns `false` once the run is over.
    pub fn advance(&mut self, sink: &mut dyn MetricsSink) -> Result<bool, OparlError> {
        if self.is_finished() {
            return Ok(false);
        }
        let obs = match self.obs.take() {
            Some(o) => o,
            None => {
                let seed = rand::RngCore::next_u64(&mut self.root.split_index("env-episode", self.state.episode));
                self.episode_return = 0.0;
                self.stats = EpisodeStats::default();
                self.env.reset(seed)
            }
        };
        let t = self.state.env_steps + 1;
        let cfg = &self.agent.cfg;
        let (learning_starts, reset_interval, resets_actors) =
            (cfg.learning_starts, cfg.reset_interval, cfg.variant.has_explorer());

        let mut action = if t <= learning_starts {
            self.warmup_action()
        } else {
            let explore = self.uses_explorer();
            self.agent
                .select_behavior_action(&obs, explore, &mut self.behavior_rng)
                .map_err(|e| e.at_step(t))?
        };
        self.agent.spec().clip_action(&mut action);
        let res = self.env.step(&action)?;
        self.episode_return += res.reward;
        self.buffer.push(Transition {
            state: obs,
            action,
            reward: res.reward,
            next_state: res.next_obs.clone(),
            done: res.done,
        })?;
        self.state.env_steps = t;

        if t > learning_starts {
            self.learn().map_err(|e| e.at_step(t))?;
        }

        if t.is_multiple_of(reset_interval) {
            if resets_actors {
                self.agent.reset_parameters()?;
            }
            self.state.resets += 1;
            let mut rec = RunMetrics::blank(RecordKind::Reset, t, self.state.episode, self.wall_ms());
            rec.reset_event = true;
            sink.record(&rec)?;
        }

        if res.episode_over() {
            let mut rec = RunMetrics::blank(RecordKind::Episode, t, self.state.episode, self.wall_ms());
            rec.episodic_return = Some(self.episode_return);
            rec.critic_loss_mean = self.stats.critic_loss.get();
            rec.q_min_mean = self.stats.q_min.get();
            rec.q_max_mean = self.stats.q_max.get();
            rec.ensemble_std_mean = self.stats.ensemble_std.get();
            rec.actor_opt_loss = self.stats.actor_opt.get();
            rec.actor_pes_loss = self.stats.actor_pes.get();
            sink.record(&rec)?;
            self.state.episode += 1;
        } else {
            self.obs = Some(res.next_obs);
        }

        if t.is_multiple_of(self.settings.eval_interval) || t == self.settings.total_steps {
            let report = self.evaluate_now()?;
            let mut rec = RunMetrics::blank(RecordKind::Eval, t, self.state.episode, self.wall_ms());
            rec.eval_return_mean = Some(report.mean());
            rec.eval_success_rate = Some(report.success_rate());
            sink.record(&rec)?;
            self.last_eval = Some(report);
        }
        Ok(!self.is_finished())
    }

    pub fn run(&mut self, sink: &mut dyn MetricsSink) -> Result<(), OparlError> {
        while self.advance(sink)? {}
        Ok(())
    }
}

impl Trainer {
    pub fn checkpoint(&self, config: std::collections::BTreeMap<String, String>) -> super::Checkpoint {
        super::Checkpoint::from_agent(&self.agent, self.env.name(), self.state.env_steps, config)
    }
}
