//! CTDL agents: a value network blended with a TD-gated episodic memory.
//!
//! * `CtdlDiscrete`: Q-network over grid actions, per-action SOM values.
//! * `CtdlContinuous`: Gaussian actor with a blended critic/SOM state value.
//! * `A2cBaseline`: the same actor-critic without a memory.
//!
//! Every agent can additionally carry a guidance explanation: whenever a
//! listed state is close enough to the current one (β above the guidance
//! threshold) the listed action is taken and the listed value is used when
//! bootstrapping.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::approx::{Activation, GaussianHead, Network, Optimizer, OptimizerKind};
use crate::env::{ActionSpace, EnvAction, EnvSpec, Environment, Observation, StateBounds};
use crate::error::{Error, Result};
use crate::explain::{Explanation, TraceRow};
use crate::som::{beta, Som, SomConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentVariant {
    CtdlDiscrete,
    CtdlContinuous,
    A2cBaseline,
}

/// Linear ε anneal from `start` to `end` over `anneal_episodes`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_episodes: usize,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { start: 1.0, end: 0.1, anneal_episodes: 200 }
    }
}

impl EpsilonSchedule {
    /// ε for a zero-based episode index.
    pub fn value(&self, episode: usize) -> f64 {
        if self.anneal_episodes == 0 {
            return self.end;
        }
        let frac = (episode as f64 / self.anneal_episodes as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub variant: AgentVariant,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub guidance_threshold: f64,
    /// Hidden layer widths of the value network (Q-network or critic).
    pub value_hidden: Vec<usize>,
    pub actor_hidden: Vec<usize>,
    pub activation: Activation,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub actor_lr: f64,
    pub policy: GaussianHead,
    pub som: SomConfig,
    /// Sample from the policy during test trials instead of acting on its mean.
    pub stochastic_test: bool,
}

impl AgentConfig {
    /// Defaults for the given task.
    pub fn for_env(env: &EnvSpec) -> Self {
        match env {
            EnvSpec::GridWorld(_) => Self {
                variant: AgentVariant::CtdlDiscrete,
                gamma: 0.99,
                epsilon: EpsilonSchedule::default(),
                guidance_threshold: 0.5,
                value_hidden: vec![32, 32],
                actor_hidden: vec![32, 32],
                activation: Activation::Tanh,
                optimizer: OptimizerKind::Adam,
                lr: 1e-3,
                actor_lr: 1e-4,
                policy: GaussianHead::default(),
                som: SomConfig { tau: 0.001, ..SomConfig::default() },
                stochastic_test: false,
            },
            EnvSpec::MountainCar(_) => Self {
                variant: AgentVariant::CtdlContinuous,
                // Random forcing reaches the flag after roughly 750 steps, so
                // the goal reward only propagates back with a long horizon.
                gamma: 0.999,
                epsilon: EpsilonSchedule::default(),
                guidance_threshold: 0.5,
                value_hidden: vec![32, 32],
                actor_hidden: vec![32, 32],
                activation: Activation::Tanh,
                optimizer: OptimizerKind::Adam,
                lr: 1e-3,
                actor_lr: 1e-4,
                // A std floor of 1 keeps the action cost from shrinking
                // exploration before the flag has been found.
                policy: GaussianHead { log_std_min: 0.0, log_std_max: 1.0 },
                som: SomConfig { tau: 0.005, ..SomConfig::default() },
                stochastic_test: true,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        let e = &self.epsilon;
        if !(0.0 <= e.end && e.end <= e.start && e.start <= 1.0) {
            return Err(Error::config("epsilon schedule must satisfy 0 <= end <= start <= 1"));
        }
        if !(self.guidance_threshold > 0.0 && self.guidance_threshold < 1.0) {
            return Err(Error::Config(format!(
                "guidance threshold must lie in (0, 1), got {}",
                self.guidance_threshold
            )));
        }
        if !(self.lr > 0.0 && self.actor_lr > 0.0) {
            return Err(Error::config("learning rates must be positive"));
        }
        if self.policy.log_std_min > self.policy.log_std_max {
            return Err(Error::config("policy log_std_min must not exceed log_std_max"));
        }
        self.som.validate()
    }
}

/// The blended value estimate for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedEstimate {
    pub beta: f64,
    /// `beta · som + (1 − beta) · dnn`, one entry per action (or one state value).
    pub values: Vec<f64>,
    pub dnn: Vec<f64>,
    /// BMU values; empty for agents without a memory.
    pub som: Vec<f64>,
    pub bmu: Option<(usize, f64)>,
}

/// What `act` chose and why.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: EnvAction,
    /// Unclipped Gaussian draw behind a continuous action.
    pub sample: Option<Vec<f64>>,
    /// The action came from guidance or a seeded memory.
    pub guided: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub decision: Decision,
    pub reward: f64,
    pub next_state: Observation,
    pub done: bool,
}

/// TD errors computed for one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnReport {
    pub target: f64,
    pub td_dnn: f64,
    pub td_som: Option<f64>,
    pub advantage: Option<f64>,
}

/// Memory use at one test-trial step.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryUse {
    pub unit: usize,
    pub weights: Vec<f64>,
    pub weights_raw: Vec<f64>,
    pub value: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialStep {
    pub t: usize,
    pub state: Observation,
    pub action: EnvAction,
    pub reward: f64,
    pub guided: bool,
    pub memory: Option<MemoryUse>,
}

impl TrialStep {
    pub fn row(&self) -> Option<TraceRow> {
        self.memory.as_ref().map(|m| TraceRow {
            t: self.t,
            unit: m.unit,
            memory: m.weights.clone(),
            memory_raw: m.weights_raw.clone(),
            value: m.value,
            beta: m.beta,
            action: self.action.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub total_reward: f64,
    pub length: usize,
    pub reached_goal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub steps: Vec<TrialStep>,
    pub summary: TrialSummary,
}

impl EpisodeTrace {
    pub fn rows(&self) -> Vec<TraceRow> {
        self.steps.iter().filter_map(TrialStep::row).collect()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Model {
    Discrete {
        q: Network,
        q_opt: Optimizer,
        som: Som,
    },
    Continuous {
        critic: Network,
        critic_opt: Optimizer,
        actor: Network,
        actor_opt: Optimizer,
        som: Option<Som>,
    },
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    Train { epsilon: f64 },
    Test { stochastic: bool },
}

#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    env: EnvSpec,
    bounds: StateBounds,
    model: Model,
    guidance: Option<Arc<Explanation>>,
    skipped: u64,
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(output)).collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn blend(beta: f64, som: &[f64], dnn: &[f64]) -> Vec<f64> {
    som.iter().zip(dnn).map(|(s, d)| beta * s + (1.0 - beta) * d).collect()
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, env: &EnvSpec, rng: &mut R) -> Result<Self> {
        config.validate()?;
        env.validate()?;
        let bounds = env.bounds()?;
        let dim = bounds.dim();
        let hidden = config.activation;
        let model = match (config.variant, env.action_space()) {
            (AgentVariant::CtdlDiscrete, ActionSpace::Discrete(n)) => {
                let q = Network::new(&layer_sizes(dim, &config.value_hidden, n), hidden, rng)?;
                let q_opt = Optimizer::new(config.optimizer, config.lr, q.params().len())?;
                let som = Som::new(config.som.clone(), dim, n, rng)?;
                Model::Discrete { q, q_opt, som }
            }
            (AgentVariant::CtdlContinuous | AgentVariant::A2cBaseline, ActionSpace::Continuous { dim: k, .. }) => {
                let critic = Network::new(&layer_sizes(dim, &config.value_hidden, 1), hidden, rng)?;
                let actor = Network::new(&layer_sizes(dim, &config.actor_hidden, 2 * k), hidden, rng)?;
                let critic_opt = Optimizer::new(config.optimizer, config.lr, critic.params().len())?;
                let actor_opt = Optimizer::new(config.optimizer, config.actor_lr, actor.params().len())?;
                let som = match config.variant {
                    AgentVariant::CtdlContinuous => Some(Som::new(config.som.clone(), dim, 1, rng)?),
                    _ => None,
                };
                Model::Continuous { critic, critic_opt, actor, actor_opt, som }
            }
            (variant, space) => {
                return Err(Error::Config(format!("agent variant {variant:?} cannot act in action space {space:?}")))
            }
        };
        Ok(Self { config, env: env.clone(), bounds, model, guidance: None, skipped: 0 })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn env_spec(&self) -> &EnvSpec {
        &self.env
    }

    pub fn bounds(&self) -> &StateBounds {
        &self.bounds
    }

    pub fn som(&self) -> Option<&Som> {
        match &self.model {
            Model::Discrete { som, .. } => Some(som),
            Model::Continuous { som, .. } => som.as_ref(),
        }
    }

    pub fn som_mut(&mut self) -> Option<&mut Som> {
        match &mut self.model {
            Model::Discrete { som, .. } => Some(som),
            Model::Continuous { som, .. } => som.as_mut(),
        }
    }

    /// The Q-network or critic.
    pub fn value_network(&self) -> &Network {
        match &self.model {
            Model::Discrete { q, .. } => q,
            Model::Continuous { critic, .. } => critic,
        }
    }

    pub fn value_network_mut(&mut self) -> &mut Network {
        match &mut self.model {
            Model::Discrete { q, .. } => q,
            Model::Continuous { critic, .. } => critic,
        }
    }

    pub fn actor(&self) -> Option<&Network> {
        match &self.model {
            Model::Discrete { .. } => None,
            Model::Continuous { actor, .. } => Some(actor),
        }
    }

    pub fn guidance(&self) -> Option<&Explanation> {
        self.guidance.as_deref()
    }

    pub fn set_guidance(&mut self, guidance: Option<Arc<Explanation>>) {
        self.guidance = guidance;
    }

    /// Writes an explanation into the episodic memory as frozen units.
    pub fn seed_memory<R: Rng + ?Sized>(&mut self, explanation: &Explanation, rng: &mut R) -> Result<()> {
        match self.som_mut() {
            Some(som) => som.seed(explanation, rng),
            None => Err(Error::config("this agent has no episodic memory to seed")),
        }
    }

    /// Transitions dropped because of non-finite intermediate values.
    pub fn skipped_transitions(&self) -> u64 {
        self.skipped
    }

    pub fn normalize(&self, s: &[f64]) -> Result<Observation> {
        self.bounds.normalize(s)
    }

    fn tau(&self) -> f64 {
        self.config.som.tau
    }

    /// Blended estimate for a raw state.
    pub fn combined_estimate(&self, s: &[f64]) -> Result<CombinedEstimate> {
        self.estimate_norm(&self.normalize(s)?)
    }

    fn estimate_norm(&self, s_norm: &[f64]) -> Result<CombinedEstimate> {
        let dnn = self.value_network().forward(s_norm)?;
        match self.som() {
            Some(som) => {
                let (b, d) = som.bmu(s_norm)?;
                let beta = beta(d, som.tau());
                let som_values = som.unit(b).values.clone();
                Ok(CombinedEstimate {
                    beta,
                    values: blend(beta, &som_values, &dnn),
                    dnn,
                    som: som_values,
                    bmu: Some((b, d)),
                })
            }
            None => Ok(CombinedEstimate { beta: 0.0, values: dnn.clone(), dnn, som: Vec::new(), bmu: None }),
        }
    }

    /// Guidance entry that fires for a normalized state: `(value, action)`.
    pub fn guidance_for(&self, s_norm: &[f64]) -> Option<(f64, EnvAction)> {
        let g = self.guidance.as_deref()?;
        guidance_lookup(g, s_norm, self.tau(), self.config.guidance_threshold)
    }

    /// Seeded memory that fires for a normalized state.
    fn seeded_action(&self, s_norm: &[f64]) -> Result<Option<EnvAction>> {
        let Some(som) = self.som() else { return Ok(None) };
        if som.frozen_count() == 0 {
            return Ok(None);
        }
        let (b, d) = som.bmu(s_norm)?;
        let unit = som.unit(b);
        if unit.frozen && beta(d, som.tau()) > self.config.guidance_threshold {
            return Ok(unit.stored_action.clone());
        }
        Ok(None)
    }

    /// Training-time action selection for a zero-based episode index.
    pub fn act<R: Rng + ?Sized>(&self, s: &[f64], episode: usize, rng: &mut R) -> Result<Decision> {
        let s_norm = self.normalize(s)?;
        self.decide(&s_norm, Mode::Train { epsilon: self.config.epsilon.value(episode) }, rng)
    }

    /// Test-time action selection: greedy, or the policy mean unless
    /// `stochastic` is set.
    pub fn act_test<R: Rng + ?Sized>(&self, s: &[f64], stochastic: bool, rng: &mut R) -> Result<Decision> {
        let s_norm = self.normalize(s)?;
        self.decide(&s_norm, Mode::Test { stochastic }, rng)
    }

    fn decide<R: Rng + ?Sized>(&self, s_norm: &[f64], mode: Mode, rng: &mut R) -> Result<Decision> {
        if let Some((_, action)) = self.guidance_for(s_norm) {
            return Ok(Decision { action, sample: None, guided: true });
        }
        if let Some(action) = self.seeded_action(s_norm)? {
            return Ok(Decision { action, sample: None, guided: true });
        }
        match &self.model {
            Model::Discrete { .. } => {
                let est = self.estimate_norm(s_norm)?;
                let n = est.values.len();
                let index = match mode {
                    Mode::Train { epsilon } => {
                        if rng.random::<f64>() < epsilon {
                            rng.random_range(0..n)
                        } else {
                            argmax(&est.values)
                        }
                    }
                    Mode::Test { .. } => argmax(&est.values),
                };
                Ok(Decision { action: EnvAction::Discrete(index), sample: None, guided: false })
            }
            Model::Continuous { actor, .. } => {
                let raw = actor.forward(s_norm)?;
                let (mean, log_std) = self.config.policy.split(&raw);
                let sample: Vec<f64> = match mode {
                    Mode::Test { stochastic: false } => mean.to_vec(),
                    _ => mean
                        .iter()
                        .zip(&log_std)
                        .map(|(m, ls)| {
                            let z: f64 = StandardNormal.sample(rng);
                            m + ls.exp() * z
                        })
                        .collect(),
                };
                let force = sample.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
                Ok(Decision { action: EnvAction::Continuous(force), sample: Some(sample), guided: false })
            }
        }
    }

    /// Value used to bootstrap from `s2_norm`: the guidance value when
    /// guidance fires there, otherwise the blended estimate.
    fn bootstrap(&self, s2_norm: &[f64], done: bool) -> Result<f64> {
        if done {
            return Ok(0.0);
        }
        if let Some((v, _)) = self.guidance_for(s2_norm) {
            return Ok(v);
        }
        let est = self.estimate_norm(s2_norm)?;
        Ok(match self.model {
            Model::Discrete { .. } => est.values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Model::Continuous { .. } => est.values[0],
        })
    }

    /// One online learning step. Non-finite intermediates skip the
    /// transition, bump the skip counter and return a numerical error.
    pub fn learn(&mut self, tr: &Transition) -> Result<LearnReport> {
        let result = match self.model {
            Model::Discrete { .. } => self.learn_discrete(tr),
            Model::Continuous { .. } => self.learn_continuous(tr),
        };
        if let Err(Error::Numerical(_)) = &result {
            self.skipped += 1;
        }
        result
    }

    fn learn_discrete(&mut self, tr: &Transition) -> Result<LearnReport> {
        let a = tr.decision.action.discrete()?;
        let s = self.normalize(&tr.state)?;
        let s2 = self.normalize(&tr.next_state)?;
        let target = tr.reward + self.config.gamma * self.bootstrap(&s2, tr.done)?;
        let Model::Discrete { q, q_opt, som } = &mut self.model else { unreachable!() };
        let q_s = q.forward(&s)?;
        if a >= q_s.len() {
            return Err(Error::Type(format!("action {a} out of range for {} actions", q_s.len())));
        }
        let (b, _) = som.bmu(&s)?;
        let td_dnn = target - q_s[a];
        let td_som = target - som.unit(b).values[a];
        if !(td_dnn.is_finite() && td_som.is_finite()) {
            return Err(Error::Numerical(format!("non-finite TD errors ({td_dnn}, {td_som})")));
        }
        q.td_step(q_opt, &s, a, td_dnn)?;
        som.update_weights(&s, td_dnn)?;
        som.update_value(b, a, td_som)?;
        Ok(LearnReport { target, td_dnn, td_som: Some(td_som), advantage: None })
    }

    fn learn_continuous(&mut self, tr: &Transition) -> Result<LearnReport> {
        let s = self.normalize(&tr.state)?;
        let s2 = self.normalize(&tr.next_state)?;
        let target = tr.reward + self.config.gamma * self.bootstrap(&s2, tr.done)?;
        let est = self.estimate_norm(&s)?;
        let advantage = target - est.values[0];
        let td_dnn = target - est.dnn[0];
        let td_som = est.bmu.map(|_| target - est.som[0]);
        if !(advantage.is_finite() && td_dnn.is_finite() && td_som.is_none_or(f64::is_finite)) {
            return Err(Error::Numerical(format!("non-finite TD errors ({td_dnn}, {td_som:?})")));
        }
        let policy = self.config.policy;
        let Model::Continuous { critic, critic_opt, actor, actor_opt, som } = &mut self.model else {
            unreachable!()
        };
        critic.td_step(critic_opt, &s, 0, td_dnn)?;
        if let (Some(som), Some((b, _)), Some(td_som)) = (som.as_mut(), est.bmu, td_som) {
            som.update_weights(&s, td_dnn)?;
            som.update_value(b, 0, td_som)?;
        }
        if !tr.decision.guided {
            let sample = match (&tr.decision.sample, &tr.decision.action) {
                (Some(sample), _) => sample.clone(),
                (None, action) => action.continuous()?.to_vec(),
            };
            actor.policy_step(actor_opt, &policy, &s, &sample, advantage)?;
        }
        Ok(LearnReport { target, td_dnn, td_som, advantage: Some(advantage) })
    }

    /// Runs one learning-free episode, handing every step to `visit`.
    pub fn test_trial_with<R: Rng + ?Sized>(
        &self,
        env: &mut Environment,
        stochastic: bool,
        rng: &mut R,
        mut visit: impl FnMut(&TrialStep),
    ) -> Result<TrialSummary> {
        let mut s = env.reset(rng);
        let mut total = 0.0;
        let mut t = 0;
        loop {
            let decision = self.act_test(&s, stochastic, rng)?;
            let memory = self.memory_use(&s, &decision.action)?;
            let step = env.step(&decision.action)?;
            total += step.reward;
            visit(&TrialStep {
                t,
                state: s,
                action: decision.action,
                reward: step.reward,
                guided: decision.guided,
                memory,
            });
            t += 1;
            if step.finished() {
                return Ok(TrialSummary { total_reward: total, length: t, reached_goal: step.done });
            }
            s = step.next_obs;
        }
    }

    /// Records the whole test trial.
    pub fn run_test_trial<R: Rng + ?Sized>(
        &self,
        env: &mut Environment,
        stochastic: bool,
        rng: &mut R,
    ) -> Result<EpisodeTrace> {
        let mut steps = Vec::new();
        let summary = self.test_trial_with(env, stochastic, rng, |s| steps.push(s.clone()))?;
        Ok(EpisodeTrace { steps, summary })
    }

    fn memory_use(&self, s: &[f64], action: &EnvAction) -> Result<Option<MemoryUse>> {
        let Some(som) = self.som() else { return Ok(None) };
        let s_norm = self.normalize(s)?;
        let (b, d) = som.bmu(&s_norm)?;
        let unit = som.unit(b);
        let value = match action {
            EnvAction::Discrete(a) if unit.values.len() > 1 => unit.values[*a],
            _ => unit.values[0],
        };
        Ok(Some(MemoryUse {
            unit: b,
            weights: unit.weights.clone(),
            weights_raw: self.bounds.denormalize(&unit.weights)?,
            value,
            beta: beta(d, som.tau()),
        }))
    }

    /// Digest of every learnable quantity (networks, optimizer moments, memory).
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        let json = serde_json::to_string(&self.model).expect("model serializes");
        json.hash(&mut h);
        h.finish()
    }

    pub fn to_checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            env: self.env.clone(),
            model: serde_json::to_value(&self.model).expect("model serializes"),
            guidance: self.guidance.as_deref().cloned(),
            skipped_transitions: self.skipped,
        }
    }

    pub fn from_checkpoint(ckpt: AgentCheckpoint) -> Result<Self> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion { found: ckpt.version, supported: CHECKPOINT_VERSION });
        }
        ckpt.config.validate()?;
        ckpt.env.validate()?;
        let model: Model = serde_json::from_value(ckpt.model).map_err(|e| Error::Parse {
            path: "model".into(),
            message: e.to_string(),
        })?;
        let bounds = ckpt.env.bounds()?;
        let agent = Self {
            config: ckpt.config,
            env: ckpt.env,
            bounds,
            model,
            guidance: ckpt.guidance.map(Arc::new),
            skipped: ckpt.skipped_transitions,
        };
        // shape check: one forward pass on the box centre
        let centre = vec![0.5; agent.bounds.dim()];
        agent.estimate_norm(&centre)?;
        Ok(agent)
    }
}

/// Among explanation entries whose β exceeds `threshold`, the one with the
/// highest value (earliest on ties): `(value, action)`.
pub fn guidance_lookup(explanation: &Explanation, s_norm: &[f64], tau: f64, threshold: f64) -> Option<(f64, EnvAction)> {
    let mut best: Option<&crate::explain::ExplanationEntry> = None;
    for e in &explanation.entries {
        if e.state_norm.len() != s_norm.len() {
            continue;
        }
        let d = e.state_norm.iter().zip(s_norm).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if beta(d, tau) > threshold && best.is_none_or(|b| e.value > b.value) {
            best = Some(e);
        }
    }
    best.map(|e| (e.value, e.action.clone()))
}

pub const CHECKPOINT_VERSION: u64 = 1;

/// Networks, optimizer state, memory and configuration in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentCheckpoint {
    pub version: u64,
    pub config: AgentConfig,
    pub env: EnvSpec,
    pub model: serde_json::Value,
    #[serde(default)]
    pub guidance: Option<Explanation>,
    #[serde(default)]
    pub skipped_transitions: u64,
}

impl AgentCheckpoint {
    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self).expect("checkpoint serializes"))?;
        Ok(())
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read agent checkpoint {}: {e}", path.display())))?;
        crate::error::from_json_str(&text)
    }
}

/// Serializable per-step record of a trial, used for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub state: Observation,
    pub action: EnvAction,
    pub reward: f64,
}

impl EpisodeTrace {
    pub fn trajectory(&self) -> Vec<TrajectoryPoint> {
        self.steps
            .iter()
            .map(|s| TrajectoryPoint { t: s.t, state: s.state.clone(), action: s.action.clone(), reward: s.reward })
            .collect()
    }
}
