use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::neural::Activation;

use super::OparlError;

/// Algorithm variant. `Oparl` is the full method; the others are ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Oparl,
    OptimisticOnly,
    PessimisticOnly,
    TwoCriticBaseline,
    RandomMember,
}

/// How per-member critic values are collapsed into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Min,
    Max,
    Mean,
}

/// Which bootstrap target the critics regress onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetRule {
    /// `r + gamma * min_i Q'_i`
    Pessimistic,
    /// `r + gamma * max_i Q'_i`
    Optimistic,
    /// `r + gamma * Q'_j`, `j` uniform per row
    RandomMember,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Oparl,
        Variant::OptimisticOnly,
        Variant::PessimisticOnly,
        Variant::TwoCriticBaseline,
        Variant::RandomMember,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Oparl => "oparl",
            Variant::OptimisticOnly => "opt-only",
            Variant::PessimisticOnly => "pes-only",
            Variant::TwoCriticBaseline => "td3",
            Variant::RandomMember => "random-member",
        }
    }

    pub fn target_rule(self) -> TargetRule {
        match self {
            Variant::OptimisticOnly => TargetRule::Optimistic,
            Variant::RandomMember => TargetRule::RandomMember,
            Variant::Oparl | Variant::PessimisticOnly | Variant::TwoCriticBaseline => {
                TargetRule::Pessimistic
            }
        }
    }

    /// Only the full method keeps a separately trained optimistic actor.
    pub fn has_explorer(self) -> bool {
        self == Variant::Oparl
    }

    /// Objective of the evaluated actor (the `pi_pes` slot).
    pub fn exploit_objective(self) -> Aggregate {
        match self {
            Variant::OptimisticOnly => Aggregate::Max,
            Variant::RandomMember => Aggregate::Mean,
            Variant::Oparl | Variant::PessimisticOnly | Variant::TwoCriticBaseline => Aggregate::Min,
        }
    }

    /// Candidate score under [`SelectionCriterion::MaxQ`].
    pub fn selection_aggregate(self) -> Aggregate {
        match self {
            Variant::Oparl | Variant::OptimisticOnly => Aggregate::Max,
            Variant::RandomMember => Aggregate::Mean,
            Variant::PessimisticOnly | Variant::TwoCriticBaseline => Aggregate::Min,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant '{s}' (oparl|opt-only|pes-only|td3|random-member)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetDirection {
    /// `pi_opt <- pi_pes`
    PesToOpt,
    /// `pi_pes <- pi_opt`
    OptToPes,
}

impl ResetDirection {
    pub fn name(self) -> &'static str {
        match self {
            ResetDirection::PesToOpt => "pes-to-opt",
            ResetDirection::OptToPes => "opt-to-pes",
        }
    }
}

impl FromStr for ResetDirection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pes-to-opt" => Ok(ResetDirection::PesToOpt),
            "opt-to-pes" => Ok(ResetDirection::OptToPes),
            _ => Err(format!("unknown reset direction '{s}' (pes-to-opt|opt-to-pes)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionCriterion {
    MaxQ,
    MaxVariance,
}

impl SelectionCriterion {
    pub fn name(self) -> &'static str {
        match self {
            SelectionCriterion::MaxQ => "max-q",
            SelectionCriterion::MaxVariance => "max-variance",
        }
    }
}

impl FromStr for SelectionCriterion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max-q" => Ok(SelectionCriterion::MaxQ),
            "max-variance" => Ok(SelectionCriterion::MaxVariance),
            _ => Err(format!("unknown criterion '{s}' (max-q|max-variance)")),
        }
    }
}

/// Granularity at which the behavior policy alternates between actors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternation {
    Episode,
    Step,
}

impl Alternation {
    pub fn name(self) -> &'static str {
        match self {
            Alternation::Episode => "episode",
            Alternation::Step => "step",
        }
    }
}

impl FromStr for Alternation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "episode" => Ok(Alternation::Episode),
            "step" => Ok(Alternation::Step),
            _ => Err(format!("unknown alternation '{s}' (episode|step)")),
        }
    }
}

/// `opt:pes` share of behavior between the two actors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BehaviorRatio {
    pub opt: u32,
    pub pes: u32,
}

impl BehaviorRatio {
    /// Whether slot `index` of the alternation cycle belongs to the optimistic actor.
    pub fn is_optimistic(self, index: u64) -> bool {
        let period = u64::from(self.opt) + u64::from(self.pes);
        index % period < u64::from(self.opt)
    }
}

impl fmt::Display for BehaviorRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.opt, self.pes)
    }
}

impl FromStr for BehaviorRatio {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("behavior ratio '{s}' must look like opt:pes"))?;
        let parse = |x: &str| {
            x.trim()
                .parse::<u32>()
                .map_err(|e| format!("behavior ratio '{s}': {e}"))
        };
        Ok(BehaviorRatio {
            opt: parse(a)?,
            pes: parse(b)?,
        })
    }
}

/// Every hyperparameter of the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct OparlConfig {
    pub variant: Variant,
    pub ensemble_size: usize,
    pub gamma: f64,
    pub tau: f64,
    pub reset_interval: u64,
    pub reset_direction: ResetDirection,
    /// Behavior noise std, as a fraction of the action scale.
    pub exploration_noise: f64,
    /// Target smoothing noise std and clip, as fractions of the action scale.
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub policy_delay: u64,
    pub behavior_ratio: BehaviorRatio,
    pub behavior_alternation: Alternation,
    pub candidate_count: usize,
    pub selection_criterion: SelectionCriterion,
    pub batch_size: usize,
    pub learning_starts: u64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub buffer_capacity: usize,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
}

impl Default for OparlConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Oparl,
            ensemble_size: 5,
            gamma: 0.99,
            tau: 0.005,
            reset_interval: 20_000,
            reset_direction: ResetDirection::PesToOpt,
            exploration_noise: 0.1,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            policy_delay: 2,
            behavior_ratio: BehaviorRatio { opt: 1, pes: 1 },
            behavior_alternation: Alternation::Episode,
            candidate_count: 10,
            selection_criterion: SelectionCriterion::MaxQ,
            batch_size: 256,
            learning_starts: 5_000,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            buffer_capacity: 1_000_000,
            hidden_sizes: vec![256, 256],
            activation: Activation::Tanh,
        }
    }
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    match s {
        "tanh" => Ok(Activation::Tanh),
        "relu" => Ok(Activation::Relu),
        _ => Err(format!("unknown activation '{s}' (tanh|relu)")),
    }
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Tanh => "tanh",
        Activation::Relu => "relu",
    }
}

fn parse_num<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| e.to_string())
}

impl OparlConfig {
    /// Smaller networks and buffer for single-core runs.
    pub fn desk() -> Self {
        Self {
            hidden_sizes: vec![64, 64],
            buffer_capacity: 100_000,
            ..Self::default()
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Applies variant rules (the two-critic baseline pins `N = 2` and a
    /// single behavior candidate) and validates every field.
    pub fn resolved(mut self) -> Result<Self, OparlError> {
        if self.variant == Variant::TwoCriticBaseline {
            self.ensemble_size = 2;
            self.candidate_count = 1;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), OparlError> {
        let bad = |key: &str, why: String| Err(OparlError::Config(format!("oparl.{key}: {why}")));
        if self.ensemble_size < 1 {
            return bad("ensemble_size", "must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", format!("must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau", format!("must lie in (0, 1], got {}", self.tau));
        }
        if self.reset_interval == 0 {
            return bad("reset_interval", "must be positive".into());
        }
        for (key, v) in [
            ("exploration_noise", self.exploration_noise),
            ("target_noise", self.target_noise),
            ("target_noise_clip", self.target_noise_clip),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(key, format!("must be finite and non-negative, got {v}"));
            }
        }
        if self.policy_delay == 0 {
            return bad("policy_delay", "must be positive".into());
        }
        if self.behavior_ratio.opt + self.behavior_ratio.pes == 0 {
            return bad("behavior_ratio", "at least one side must be positive".into());
        }
        if self.candidate_count == 0 {
            return bad("candidate_count", "must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1".into());
        }
        for (key, v) in [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(key, format!("must be positive, got {v}"));
            }
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity", "must be positive".into());
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return bad("hidden_sizes", "need at least one positive layer width".into());
        }
        Ok(())
    }

    /// Flat `oparl.*` key/value view, values in canonical text form.
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let hidden = self
            .hidden_sizes
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",");
        [
            ("variant", self.variant.name().to_string()),
            ("ensemble_size", self.ensemble_size.to_string()),
            ("gamma", self.gamma.to_string()),
            ("tau", self.tau.to_string()),
            ("reset_interval", self.reset_interval.to_string()),
            ("reset_direction", self.reset_direction.name().to_string()),
            ("exploration_noise", self.exploration_noise.to_string()),
            ("target_noise", self.target_noise.to_string()),
            ("target_noise_clip", self.target_noise_clip.to_string()),
            ("policy_delay", self.policy_delay.to_string()),
            ("behavior_ratio", self.behavior_ratio.to_string()),
            ("behavior_alternation", self.behavior_alternation.name().to_string()),
            ("candidate_count", self.candidate_count.to_string()),
            ("selection_criterion", self.selection_criterion.name().to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_starts", self.learning_starts.to_string()),
            ("lr_actor", self.lr_actor.to_string()),
            ("lr_critic", self.lr_critic.to_string()),
            ("buffer_capacity", self.buffer_capacity.to_string()),
            ("hidden_sizes", hidden),
            ("activation", activation_name(self.activation).to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (format!("oparl.{k}"), v))
        .collect()
    }

    /// Sets one field from its key (without the `oparl.` prefix).
    /// Unknown keys are reported as `Err(None)`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Option<String>> {
        let v = value.trim();
        let r: Result<(), String> = match key {
            "variant" => v.parse().map(|x| self.variant = x),
            "ensemble_size" => parse_num(v).map(|x| self.ensemble_size = x),
            "gamma" => parse_num(v).map(|x| self.gamma = x),
            "tau" => parse_num(v).map(|x| self.tau = x),
            "reset_interval" => parse_num(v).map(|x| self.reset_interval = x),
            "reset_direction" => v.parse().map(|x| self.reset_direction = x),
            "exploration_noise" => parse_num(v).map(|x| self.exploration_noise = x),
            "target_noise" => parse_num(v).map(|x| self.target_noise = x),
            "target_noise_clip" => parse_num(v).map(|x| self.target_noise_clip = x),
            "policy_delay" => parse_num(v).map(|x| self.policy_delay = x),
            "behavior_ratio" => v.parse().map(|x| self.behavior_ratio = x),
            "behavior_alternation" => v.parse().map(|x| self.behavior_alternation = x),
            "candidate_count" => parse_num(v).map(|x| self.candidate_count = x),
            "selection_criterion" => v.parse().map(|x| self.selection_criterion = x),
            "batch_size" => parse_num(v).map(|x| self.batch_size = x),
            "learning_starts" => parse_num(v).map(|x| self.learning_starts = x),
            "lr_actor" => parse_num(v).map(|x| self.lr_actor = x),
            "lr_critic" => parse_num(v).map(|x| self.lr_critic = x),
            "buffer_capacity" => parse_num(v).map(|x| self.buffer_capacity = x),
            "hidden_sizes" => v
                .split(',')
                .map(parse_num::<usize>)
                .collect::<Result<Vec<_>, _>>()
                .map(|x| self.hidden_sizes = x),
            "activation" => parse_activation(v).map(|x| self.activation = x),
            _ => return Err(None),
        };
        r.map_err(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = OparlConfig::default();
        assert_eq!(c.ensemble_size, 5);
        assert_eq!(c.gamma, 0.99);
        assert_eq!(c.tau, 0.005);
        assert_eq!(c.reset_interval, 20_000);
        assert_eq!(c.reset_direction, ResetDirection::PesToOpt);
        assert_eq!(c.behavior_ratio, BehaviorRatio { opt: 1, pes: 1 });
        assert_eq!(c.candidate_count, 10);
        assert_eq!(c.selection_criterion, SelectionCriterion::MaxQ);
        assert_eq!(c.policy_delay, 2);
        assert_eq!((c.target_noise, c.target_noise_clip), (0.2, 0.5));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn td3_pins_two_critics() {
        let c = OparlConfig::default()
            .with_variant(Variant::TwoCriticBaseline)
            .resolved()
            .unwrap();
        assert_eq!(c.ensemble_size, 2);
        assert_eq!(c.candidate_count, 1);
    }

    #[test]
    fn invalid_values_rejected() {
        let mut c = OparlConfig::default();
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        let mut c = OparlConfig::default();
        c.candidate_count = 0;
        assert!(c.validate().unwrap_err().to_string().contains("candidate_count"));
        let mut c = OparlConfig::default();
        c.lr_actor = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn kv_round_trip() {
        let mut c = OparlConfig::desk();
        c.gamma = 0.97;
        c.tau = 1.0 / 3.0;
        c.behavior_ratio = BehaviorRatio { opt: 2, pes: 3 };
        c.selection_criterion = SelectionCriterion::MaxVariance;
        let mut back = OparlConfig::default();
        for (k, v) in c.to_kv() {
            back.set(k.strip_prefix("oparl.").unwrap(), &v).unwrap();
        }
        assert_eq!(back, c);
        assert_eq!(back.set("nope", "1"), Err(None));
        assert!(matches!(back.set("gamma", "abc"), Err(Some(_))));
    }

    #[test]
    fn ratio_alternation() {
        let r = BehaviorRatio { opt: 1, pes: 1 };
        assert!(r.is_optimistic(0));
        assert!(!r.is_optimistic(1));
        let r = BehaviorRatio { opt: 2, pes: 1 };
        let pattern: Vec<bool> = (0..6).map(|i| r.is_optimistic(i)).collect();
        assert_eq!(pattern, vec![true, true, false, true, true, false]);
    }
}
