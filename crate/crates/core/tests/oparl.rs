use oparl::envs::{EnvKind, EnvSpec};
use oparl::neural::{polyak_update, Activation, Mlp, OutputTransform, Rng};
use oparl::oparl::{
    bootstrap_targets, ActorPair, Agent, Checkpoint, EnsembleCritic, OparlConfig, RecordKind, ResetDirection,
    RunMetrics, RunSettings, SelectionCriterion, TargetRule, Trainer, Variant,
};
use oparl::replay::Batch;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn spec(obs_dim: usize, action_dim: usize) -> EnvSpec {
    EnvSpec {
        obs_dim,
        action_dim,
        action_low: vec![-1.0; action_dim],
        action_high: vec![1.0; action_dim],
        max_episode_steps: 100,
    }
}

fn small_cfg(variant: Variant) -> OparlConfig {
    OparlConfig {
        hidden_sizes: vec![8, 8],
        batch_size: 16,
        learning_starts: 100,
        buffer_capacity: 10_000,
        ..OparlConfig::desk()
    }
    .with_variant(variant)
}

fn settings(total_steps: u64, seed: u64) -> RunSettings {
    RunSettings {
        total_steps,
        eval_interval: 200,
        eval_episodes: 2,
        seed,
    }
}

fn bits(net: &Mlp) -> Vec<u64> {
    net.params().iter().map(|p| p.to_bits()).collect()
}

/// Critic with zero weights whose output is the constant `value`.
fn constant_critic(obs_dim: usize, action_dim: usize, value: f64) -> Mlp {
    let mut net = Mlp::zeros(&[obs_dim + action_dim, 4, 1], Activation::Tanh, OutputTransform::Identity).unwrap();
    net.layer_bias_mut(1)[0] = value;
    net
}

fn random_batch(rng: &mut Rng, size: usize, obs_dim: usize, action_dim: usize, p_done: f64) -> Batch {
    let mut draw = |n: usize| (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect::<Vec<f64>>();
    let states = draw(size * obs_dim);
    let actions = draw(size * action_dim);
    let rewards = draw(size);
    let next_states = draw(size * obs_dim);
    let dones = (0..size).map(|_| rng.uniform(0.0, 1.0) < p_done).collect();
    Batch {
        size,
        obs_dim,
        action_dim,
        states,
        actions,
        rewards,
        next_states,
        dones,
    }
}

fn random_agent(variant: Variant, members: usize, seed: u64) -> Agent {
    let cfg = OparlConfig {
        ensemble_size: members,
        hidden_sizes: vec![16, 16],
        ..OparlConfig::default()
    }
    .with_variant(variant)
    .resolved()
    .unwrap();
    Agent::new(&spec(3, 2), cfg, &mut Rng::new(seed)).unwrap()
}

fn strip_wall(stream: &[RunMetrics]) -> Vec<RunMetrics> {
    stream
        .iter()
        .map(|m| RunMetrics { wall_ms: 0, ..m.clone() })
        .collect()
}

fn run(variant: Variant, cfg: OparlConfig, steps: u64, seed: u64) -> (Trainer, Vec<RunMetrics>) {
    let cfg = OparlConfig { variant, ..cfg };
    let mut t = Trainer::new(EnvKind::PointMass, cfg, settings(steps, seed)).unwrap();
    let mut sink = Vec::new();
    t.run(&mut sink).unwrap();
    (t, sink)
}

#[test]
fn stub_critics_give_known_targets() {
    let s = spec(2, 1);
    let critics = [1.0, 2.0, 3.0].map(|v| constant_critic(2, 1, v)).to_vec();
    let critic = EnsembleCritic::from_critics(critics, 2, 1, 1e-3).unwrap();
    let actor = Mlp::zeros(&[2, 4, 1], Activation::Tanh, OutputTransform::Bounded { scale: 1.0 }).unwrap();
    let cfg = OparlConfig::default().resolved().unwrap();
    let agent = Agent::from_parts(&s, cfg, critic, ActorPair::from_actor(actor, 1e-3));
    let mut batch = random_batch(&mut Rng::new(1), 4, 2, 1, 0.0);
    batch.rewards = vec![1.0, 1.0, -2.5, 0.25];
    batch.dones = vec![false, false, true, true];

    let y1 = agent.compute_target_pessimistic(&batch, &mut Rng::new(2)).unwrap();
    let y2 = agent.compute_target_optimistic(&batch, &mut Rng::new(2)).unwrap();
    assert!((y1[0] - 1.99).abs() < 1e-12 && (y1[1] - 1.99).abs() < 1e-12);
    assert!((y2[0] - 3.97).abs() < 1e-12 && (y2[1] - 3.97).abs() < 1e-12);
    assert_eq!(&y1[2..], &[-2.5, 0.25]);
    assert_eq!(&y2[2..], &[-2.5, 0.25]);
    let yr = agent
        .compute_target_random_member(&batch, &mut Rng::new(2), &mut Rng::new(3))
        .unwrap();
    for v in &yr[..2] {
        assert!([1.99, 2.98, 3.97].iter().any(|t| (v - t).abs() < 1e-12), "{v}");
    }
    assert_eq!(&yr[2..], &[-2.5, 0.25]);
}

#[test]
fn random_member_draw_is_uniform() {
    let rows = 100_000;
    let values: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64; rows]).collect();
    let y = bootstrap_targets(
        &vec![0.0; rows],
        &vec![false; rows],
        &values,
        1.0,
        TargetRule::RandomMember,
        &mut Rng::new(77),
    );
    let mut counts = [0u64; 5];
    for v in y {
        counts[v as usize] += 1;
    }
    let expected = rows as f64 / 5.0;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(4.0).unwrap().cdf(stat);
    assert!(p > 0.001, "{counts:?} p {p}");
}

#[test]
fn agent_targets_are_ordered_on_random_batches() {
    let agent = random_agent(Variant::Oparl, 5, 3);
    let batch = random_batch(&mut Rng::new(4), 512, 3, 2, 0.2);
    let y1 = agent.compute_target_pessimistic(&batch, &mut Rng::new(5)).unwrap();
    let y2 = agent.compute_target_optimistic(&batch, &mut Rng::new(5)).unwrap();
    let yr = agent
        .compute_target_random_member(&batch, &mut Rng::new(5), &mut Rng::new(6))
        .unwrap();
    let a = agent.target_actions(&batch.next_states, batch.size, &mut Rng::new(5)).unwrap();
    let q = agent.target_member_values(&batch.next_states, &a, batch.size).unwrap();
    for row in 0..batch.size {
        assert!(y1[row] <= yr[row] && yr[row] <= y2[row], "row {row}");
        let (lo, hi) = q.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
            (lo.min(m[row]), hi.max(m[row]))
        });
        let d = if batch.dones[row] { 0.0 } else { 1.0 };
        assert!(((y2[row] - y1[row]) - 0.99 * d * (hi - lo)).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn bootstrap_targets_are_ordered(
        rows in prop::collection::vec(
            (prop::collection::vec(-100.0f64..100.0, 5), -10.0f64..10.0, any::<bool>()),
            1..64,
        ),
        gamma in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let n = rows.len();
        let values: Vec<Vec<f64>> = (0..5).map(|m| rows.iter().map(|r| r.0[m]).collect()).collect();
        let rewards: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let dones: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let mut rng = Rng::new(seed);
        let y1 = bootstrap_targets(&rewards, &dones, &values, gamma, TargetRule::Pessimistic, &mut rng);
        let y2 = bootstrap_targets(&rewards, &dones, &values, gamma, TargetRule::Optimistic, &mut rng);
        let yr = bootstrap_targets(&rewards, &dones, &values, gamma, TargetRule::RandomMember, &mut rng);
        for i in 0..n {
            prop_assert!(y1[i] <= yr[i] && yr[i] <= y2[i]);
            let lo = rows[i].0.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = rows[i].0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let d = if dones[i] { 0.0 } else { 1.0 };
            prop_assert!(((y2[i] - y1[i]) - gamma * d * (hi - lo)).abs() < 1e-12);
            if dones[i] {
                prop_assert_eq!(y1[i], rewards[i]);
                prop_assert_eq!(y2[i], rewards[i]);
            }
        }
    }
}

#[test]
fn max_q_selection_picks_the_best_candidate() {
    let agent = random_agent(Variant::Oparl, 5, 11);
    let mut rng = Rng::new(12);
    for call in 0..300 {
        let state: Vec<f64> = (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let explore = call % 2 == 0;
        let mut probe = rng.clone();
        let candidates = agent.behavior_candidates(&state, explore, &mut probe).unwrap();
        let chosen = agent.select_behavior_action(&state, explore, &mut rng).unwrap();
        let score = |a: &[f64]| {
            let x: Vec<f64> = state.iter().chain(a).copied().collect();
            agent
                .critic
                .critics
                .iter()
                .map(|c| c.forward(&x).unwrap()[0])
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let best = candidates.iter().map(|a| score(a)).fold(f64::NEG_INFINITY, f64::max);
        assert!(candidates.contains(&chosen));
        assert!(score(&chosen) >= best - 1e-12, "call {call}");
    }
}

#[test]
fn single_candidate_skips_scoring() {
    let mut agent = random_agent(Variant::Oparl, 5, 1);
    agent.cfg.candidate_count = 1;
    let state = [0.3, -0.1, 0.7];
    let c = agent.behavior_candidates(&state, true, &mut Rng::new(5)).unwrap();
    let a = agent.select_behavior_action(&state, true, &mut Rng::new(5)).unwrap();
    assert_eq!(c, vec![a]);
}

#[test]
fn max_variance_with_identical_critics_keeps_the_first_candidate() {
    let mut agent = random_agent(Variant::Oparl, 4, 2);
    let first = agent.critic.critics[0].clone();
    agent.critic.critics.iter_mut().for_each(|c| *c = first.clone());
    agent.cfg.selection_criterion = SelectionCriterion::MaxVariance;
    let state = [0.5, 0.5, -0.5];
    for seed in 0..20 {
        let c = agent.behavior_candidates(&state, true, &mut Rng::new(seed)).unwrap();
        let a = agent.select_behavior_action(&state, true, &mut Rng::new(seed)).unwrap();
        assert_eq!(a, c[0]);
    }
}

#[test]
fn candidates_respect_action_bounds() {
    let mut agent = random_agent(Variant::Oparl, 3, 8);
    agent.cfg.exploration_noise = 5.0;
    let cands = agent.behavior_candidates(&[0.0, 0.0, 0.0], true, &mut Rng::new(1)).unwrap();
    assert_eq!(cands.len(), 10);
    assert!(cands.iter().flatten().all(|a| (-1.0..=1.0).contains(a)));
}

/// Every network and optimizer other than the reset destination.
fn untouched_by_reset(agent: &Agent, direction: ResetDirection) -> Vec<Vec<u64>> {
    let mut out: Vec<Vec<u64>> = agent.critic.critics.iter().chain(&agent.critic.targets).map(bits).collect();
    for adam in agent.critic.adam.iter().chain([&agent.actors.adam_opt, &agent.actors.adam_pes]) {
        out.push(adam.first_moment().iter().map(|v| v.to_bits()).collect());
        out.push(adam.second_moment().iter().map(|v| v.to_bits()).collect());
        out.push(vec![adam.step_count()]);
    }
    out.push(bits(&agent.actors.pi_pes_target));
    out.push(match direction {
        ResetDirection::PesToOpt => bits(&agent.actors.pi_pes),
        ResetDirection::OptToPes => bits(&agent.actors.pi_opt),
    });
    out
}

#[test]
fn reset_copies_only_the_destination_actor() {
    for direction in [ResetDirection::PesToOpt, ResetDirection::OptToPes] {
        let mut agent = random_agent(Variant::Oparl, 3, 21);
        agent.cfg.reset_direction = direction;
        let batch = random_batch(&mut Rng::new(22), 32, 3, 2, 0.1);
        for _ in 0..5 {
            let y = agent.compute_target_pessimistic(&batch, &mut Rng::new(23)).unwrap();
            agent.update_critics(&batch, &y).unwrap();
            agent.update_actors(&batch).unwrap();
            agent.soft_update_targets().unwrap();
        }
        assert_ne!(bits(&agent.actors.pi_opt), bits(&agent.actors.pi_pes));
        let before = untouched_by_reset(&agent, direction);
        agent.reset_parameters().unwrap();
        assert_eq!(bits(&agent.actors.pi_opt), bits(&agent.actors.pi_pes));
        assert_eq!(untouched_by_reset(&agent, direction), before);
    }
}

#[test]
fn resets_fire_exactly_at_interval_multiples() {
    let cfg = OparlConfig {
        reset_interval: 50,
        learning_starts: 20,
        ..small_cfg(Variant::Oparl)
    };
    let mut t = Trainer::new(EnvKind::PointMass, cfg, settings(200, 5)).unwrap();
    let mut sink = Vec::new();
    for step in 1..=200u64 {
        t.advance(&mut sink).unwrap();
        let equal = bits(&t.agent().actors.pi_opt) == bits(&t.agent().actors.pi_pes);
        if step % 50 == 0 {
            assert!(equal, "no copy at step {step}");
        } else if step > 22 && step % 50 != 1 {
            // step 51 etc. has no actor update under the policy delay
            assert!(!equal, "actors equal at step {step}");
        }
    }
    assert!(t.is_finished());
    let resets: Vec<u64> = sink
        .iter()
        .filter(|m| m.kind == RecordKind::Reset)
        .map(|m| m.step)
        .collect();
    assert_eq!(resets, vec![50, 100, 150, 200]);
    assert!(sink.iter().all(|m| m.reset_event == (m.kind == RecordKind::Reset)));
    assert_eq!(t.state().resets, 4);
}

/// Critic `offset - |a - peak|` over a one-dimensional action, built from
/// two ReLU units.
fn tent_critic(obs_dim: usize, peak: f64, offset: f64) -> Mlp {
    let mut net = Mlp::zeros(&[obs_dim + 1, 2, 1], Activation::Relu, OutputTransform::Identity).unwrap();
    let w = net.layer_weights_mut(0);
    w[obs_dim] = 1.0;
    w[2 * (obs_dim + 1) - 1] = -1.0;
    net.layer_bias_mut(0).copy_from_slice(&[-peak, peak]);
    net.layer_weights_mut(1).copy_from_slice(&[-1.0, -1.0]);
    net.layer_bias_mut(1)[0] = offset;
    net
}

#[test]
fn actors_climb_a_frozen_critic_to_its_peak() {
    let peak = 0.4;
    let s = spec(2, 1);
    let critics = vec![tent_critic(2, peak, 0.0), tent_critic(2, peak, 1.0)];
    let critic = EnsembleCritic::from_critics(critics, 2, 1, 1e-3).unwrap();
    let actor = Mlp::init(
        &[2, 16, 1],
        Activation::Tanh,
        OutputTransform::Bounded { scale: 1.0 },
        &mut Rng::new(31),
    )
    .unwrap();
    let mut pair = ActorPair::from_actor(actor, 1e-2);
    // start the two actors apart so both objectives are exercised
    pair.pi_opt.params_mut().iter_mut().for_each(|p| *p = -*p);
    let cfg = OparlConfig::default().resolved().unwrap();
    let mut agent = Agent::from_parts(&s, cfg, critic, pair);
    let frozen: Vec<Vec<u64>> = agent.critic.critics.iter().map(bits).collect();
    let batch = random_batch(&mut Rng::new(32), 64, 2, 1, 0.0);
    for _ in 0..1500 {
        agent.update_actors(&batch).unwrap();
    }
    assert_eq!(agent.critic.critics.iter().map(bits).collect::<Vec<_>>(), frozen);
    for row in batch.states.chunks(2) {
        let a_pes = agent.actors.pi_pes.forward(row).unwrap()[0];
        let a_opt = agent.actors.pi_opt.forward(row).unwrap()[0];
        assert!((a_pes - peak).abs() < 0.05, "pes {a_pes}");
        assert!((a_opt - peak).abs() < 0.05, "opt {a_opt}");
    }
}

#[test]
fn single_actor_variants_leave_the_explorer_untouched() {
    for variant in [Variant::PessimisticOnly, Variant::OptimisticOnly, Variant::RandomMember, Variant::TwoCriticBaseline] {
        let cfg = OparlConfig {
            reset_interval: 100,
            ..small_cfg(variant)
        };
        let fresh = Trainer::new(EnvKind::PointMass, cfg.clone(), settings(300, 3)).unwrap();
        let before = bits(&fresh.agent().actors.pi_opt);
        let (t, sink) = run(variant, cfg, 300, 3);
        assert_eq!(bits(&t.agent().actors.pi_opt), before, "{variant}");
        assert_eq!(t.agent().actors.adam_opt.step_count(), 0, "{variant}");
        assert_ne!(bits(&t.agent().actors.pi_pes), before, "{variant}");
        assert!(sink.iter().all(|m| m.kind != RecordKind::Episode || m.actor_pes_loss.is_some() || m.step <= 100));
    }
}

#[test]
fn two_critic_baseline_uses_two_members() {
    let (t, _) = run(Variant::TwoCriticBaseline, small_cfg(Variant::TwoCriticBaseline), 150, 1);
    assert_eq!(t.agent().critic.len(), 2);
    assert_eq!(t.agent().cfg.candidate_count, 1);
}

#[test]
fn no_learning_before_warmup_ends() {
    let cfg = small_cfg(Variant::Oparl);
    let fresh = Trainer::new(EnvKind::PointMass, cfg.clone(), settings(100, 9)).unwrap();
    let (t, _) = run(Variant::Oparl, cfg.clone(), 100, 9);
    assert_eq!(t.state().grad_steps, 0);
    for (a, b) in fresh.agent().critic.critics.iter().zip(&t.agent().critic.critics) {
        assert_eq!(bits(a), bits(b));
    }
    assert_eq!(bits(&fresh.agent().actors.pi_pes), bits(&t.agent().actors.pi_pes));
    let (t, _) = run(Variant::Oparl, cfg, 101, 9);
    assert_eq!(t.state().grad_steps, 1);
    assert_eq!(t.buffer().len(), 101);
}

#[test]
fn policy_delay_paces_actor_updates() {
    let cfg = small_cfg(Variant::Oparl);
    let fresh = Trainer::new(EnvKind::PointMass, cfg.clone(), settings(101, 2)).unwrap();
    let (t, _) = run(Variant::Oparl, cfg.clone(), 101, 2);
    assert_eq!(bits(&fresh.agent().actors.pi_pes), bits(&t.agent().actors.pi_pes));
    assert_eq!(t.agent().critic.adam[0].step_count(), 1);
    let (t, _) = run(Variant::Oparl, cfg, 102, 2);
    assert_eq!(t.agent().actors.adam_pes.step_count(), 1);
    assert_eq!(t.agent().actors.adam_opt.step_count(), 1);
}

#[test]
fn identical_seeds_reproduce_the_stream() {
    let cfg = OparlConfig {
        reset_interval: 150,
        ..small_cfg(Variant::Oparl)
    };
    let (a, sa) = run(Variant::Oparl, cfg.clone(), 600, 4);
    let (b, sb) = run(Variant::Oparl, cfg.clone(), 600, 4);
    assert_eq!(strip_wall(&sa), strip_wall(&sb));
    assert_eq!(bits(&a.agent().actors.pi_pes), bits(&b.agent().actors.pi_pes));
    let (_, sc) = run(Variant::Oparl, cfg, 600, 5);
    assert_ne!(strip_wall(&sa), strip_wall(&sc));
}

#[test]
fn single_member_variants_coincide() {
    let cfg = OparlConfig {
        ensemble_size: 1,
        reset_interval: 120,
        ..small_cfg(Variant::Oparl)
    };
    let (_, reference) = run(Variant::Oparl, cfg.clone(), 400, 6);
    for variant in [Variant::OptimisticOnly, Variant::PessimisticOnly, Variant::RandomMember] {
        let (_, stream) = run(variant, cfg.clone(), 400, 6);
        assert_eq!(strip_wall(&stream), strip_wall(&reference), "{variant}");
    }
}

#[test]
fn critic_update_is_a_no_op_at_the_fit() {
    let mut agent = random_agent(Variant::Oparl, 3, 40);
    let batch = random_batch(&mut Rng::new(41), 32, 3, 2, 0.0);
    let before: Vec<Vec<u64>> = agent.critic.critics.iter().map(bits).collect();
    let q = agent.critic.q_values(&batch.states, &batch.actions, batch.size).unwrap();
    // every member fits its own values exactly when all members agree
    let first = agent.critic.critics[0].clone();
    agent.critic.critics.iter_mut().for_each(|c| *c = first.clone());
    let upd = agent.update_critics(&batch, &q[0]).unwrap();
    assert!(upd.losses.iter().all(|&l| l == 0.0));
    for c in &agent.critic.critics {
        assert_eq!(bits(c), before[0]);
    }
    assert_eq!(upd.ensemble_std_mean, 0.0);
}

#[test]
fn critic_update_reduces_the_loss() {
    let mut agent = random_agent(Variant::Oparl, 3, 42);
    let batch = random_batch(&mut Rng::new(43), 64, 3, 2, 0.0);
    let y = vec![0.5; batch.size];
    let first = agent.update_critics(&batch, &y).unwrap();
    let mut last = first.clone();
    for _ in 0..50 {
        last = agent.update_critics(&batch, &y).unwrap();
    }
    for (a, b) in first.losses.iter().zip(&last.losses) {
        assert!(b < a, "{b} !< {a}");
    }
}

#[test]
fn soft_update_follows_polyak_rule() {
    for tau in [0.0, 0.005, 1.0] {
        let mut agent = random_agent(Variant::Oparl, 3, 50);
        agent.cfg.tau = tau;
        let batch = random_batch(&mut Rng::new(51), 32, 3, 2, 0.0);
        let y = vec![1.0; batch.size];
        agent.update_critics(&batch, &y).unwrap();
        agent.update_actors(&batch).unwrap();
        let old = agent.clone();
        agent.soft_update_targets().unwrap();
        let pairs = agent
            .critic
            .targets
            .iter()
            .zip(old.critic.targets.iter().zip(&old.critic.critics))
            .chain([(&agent.actors.pi_pes_target, (&old.actors.pi_pes_target, &old.actors.pi_pes))]);
        for (new, (prev, online)) in pairs {
            for ((n, p), o) in new.params().iter().zip(prev.params()).zip(online.params()) {
                assert!((n - (tau * o + (1.0 - tau) * p)).abs() <= 1e-12);
            }
        }
        assert_eq!(bits(&agent.actors.pi_opt), bits(&old.actors.pi_opt));
    }
}

#[test]
fn polyak_rejects_mismatched_networks() {
    let mut a = Mlp::zeros(&[2, 3, 1], Activation::Tanh, OutputTransform::Identity).unwrap();
    let b = Mlp::zeros(&[2, 4, 1], Activation::Tanh, OutputTransform::Identity).unwrap();
    assert!(polyak_update(&mut a, &b, 0.5).is_err());
}

#[test]
fn checkpoint_restores_the_evaluation_actor() {
    let (t, _) = run(Variant::Oparl, small_cfg(Variant::Oparl), 150, 8);
    let json = t.checkpoint(Default::default()).to_json().unwrap();
    let back = Checkpoint::from_json(&json).unwrap();
    assert_eq!(back.step, 150);
    let actor = back.evaluation_actor(t.agent().spec()).unwrap();
    assert_eq!(bits(&actor), bits(&t.agent().actors.pi_pes));
    assert_eq!(back.networks.critics.len(), 5);
}

#[test]
fn non_finite_updates_abort() {
    let cfg = OparlConfig {
        lr_critic: 1e300,
        ..small_cfg(Variant::Oparl)
    };
    let mut t = Trainer::new(EnvKind::PointMass, cfg, settings(400, 1)).unwrap();
    let err = t.run(&mut Vec::new()).unwrap_err();
    assert!(err.is_numeric(), "{err}");
}
