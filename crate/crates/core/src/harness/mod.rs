//! Experiment harness: seeded population training with checkpointed
//! explanations, best-agent selection, group comparisons, metrics files and
//! renderers.

mod compare;
mod config;
mod render;

pub use compare::{
    run_group_comparison, write_report, ComparisonReport, GroupCurves, GroupReport, GroupSummary,
};
pub use config::{merge, ExperimentConfig, GroupKind, Preset};
pub use render::{export_mc_plot_data, render_gridworld_ascii, render_gridworld_svg};

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentVariant, Transition};
use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::explain::{self, Explanation, Provenance, TraceRow};
use crate::seed::{derive_seed, rng_for, stream};

/// What a group's agents receive before training.
#[derive(Debug, Clone, Default)]
pub enum Provision {
    #[default]
    None,
    /// Each agent picks one of these uniformly at random.
    Explanations(Vec<Arc<Explanation>>),
}

/// One arm of an experiment.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    pub name: String,
    /// Overrides the configured agent variant.
    pub variant: Option<AgentVariant>,
    pub provision: Provision,
}

impl GroupSpec {
    pub fn none(name: impl Into<String>) -> Self {
        Self { name: name.into(), variant: None, provision: Provision::None }
    }

    pub fn guided(name: impl Into<String>, explanations: Vec<Explanation>) -> Self {
        Self {
            name: name.into(),
            variant: None,
            provision: Provision::Explanations(explanations.into_iter().map(Arc::new).collect()),
        }
    }

    pub fn with_variant(mut self, variant: AgentVariant) -> Self {
        self.variant = Some(variant);
        self
    }

    /// The group described by a config's `group` and `explanations` fields;
    /// explanation files are read here, before any training.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let name = match cfg.group {
            GroupKind::None => "none",
            GroupKind::Explanation => "explanation",
            GroupKind::Shuffled => "shuffled",
        };
        if cfg.group == GroupKind::None {
            return Ok(Self::none(name));
        }
        let explanations = cfg.explanations.iter().map(|p| Explanation::read(p)).collect::<Result<Vec<_>>>()?;
        Ok(Self::guided(name, explanations))
    }
}

/// Test trials and explanations taken at one training episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub episode: usize,
    pub test_rewards: Vec<f64>,
    pub test_lengths: Vec<usize>,
    pub test_reached_goal: Vec<bool>,
    pub explanations: Vec<Explanation>,
    /// Max-β row of every memory used in each test trial; the sampling pool
    /// for shuffled controls.
    pub used_memories: Vec<Vec<TraceRow>>,
}

impl Checkpoint {
    pub fn mean_test_reward(&self) -> f64 {
        self.test_rewards.iter().sum::<f64>() / self.test_rewards.len().max(1) as f64
    }
}

/// Training history of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub agent_id: usize,
    pub seed: u64,
    pub group: String,
    pub rewards: Vec<f64>,
    pub lengths: Vec<usize>,
    pub reached_goal: Vec<bool>,
    pub checkpoints: Vec<Checkpoint>,
    pub final_test_reward: f64,
    pub total_training_reward: f64,
    pub skipped_transitions: u64,
    /// Index of the explanation this agent received, if any.
    pub received_explanation: Option<usize>,
    pub failed: Option<String>,
}

impl RunRecord {
    fn new(agent_id: usize, seed: u64, group: &str) -> Self {
        Self {
            agent_id,
            seed,
            group: group.to_string(),
            rewards: Vec::new(),
            lengths: Vec::new(),
            reached_goal: Vec::new(),
            checkpoints: Vec::new(),
            final_test_reward: f64::NEG_INFINITY,
            total_training_reward: 0.0,
            skipped_transitions: 0,
            received_explanation: None,
            failed: None,
        }
    }

    pub fn checkpoint(&self, episode: usize) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.episode == episode)
    }

    pub fn final_checkpoint(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }
}

/// A finished run with the trained agent (absent when the run failed).
#[derive(Debug, Clone)]
pub struct AgentRun {
    pub record: RunRecord,
    pub agent: Option<Agent>,
}

fn is_checkpoint(cfg: &ExperimentConfig, episode: usize) -> bool {
    episode == cfg.episodes || cfg.checkpoint_every.is_some_and(|every| episode % every == 0)
}

/// Builds the agent for population slot `index`, including any provision.
pub fn build_agent(cfg: &ExperimentConfig, index: usize, group: &GroupSpec) -> Result<(Agent, Option<usize>)> {
    let mut agent_cfg = cfg.agent.clone();
    if let Some(v) = group.variant {
        agent_cfg.variant = v;
    }
    let master = cfg.master_seed;
    let mut agent = Agent::new(agent_cfg, &cfg.environment, &mut rng_for(&[master, index as u64, 0, stream::INIT]))?;
    let mut received = None;
    if let Provision::Explanations(list) = &group.provision {
        if list.is_empty() {
            return Err(Error::config("guided group has no explanations"));
        }
        let mut rng = rng_for(&[master, index as u64, 0, stream::PROVIDE]);
        let pick = if list.len() == 1 { 0 } else { rand::Rng::random_range(&mut rng, 0..list.len()) };
        let expl = Arc::clone(&list[pick]);
        if agent.som().is_some() {
            agent.seed_memory(&expl, &mut rng)?;
        }
        agent.set_guidance(Some(expl));
        received = Some(pick);
    }
    Ok((agent, received))
}

/// Trains agent `index` of a population, checkpointing as configured.
pub fn run_agent(cfg: &ExperimentConfig, index: usize, group: &GroupSpec) -> AgentRun {
    let seed = derive_seed(&[cfg.master_seed, index as u64]);
    let mut record = RunRecord::new(index, seed, &group.name);
    match train_agent(cfg, index, group, &mut record) {
        Ok(agent) => AgentRun { record, agent: Some(agent) },
        Err(e) => {
            record.failed = Some(e.to_string());
            AgentRun { record, agent: None }
        }
    }
}

fn train_agent(cfg: &ExperimentConfig, index: usize, group: &GroupSpec, record: &mut RunRecord) -> Result<Agent> {
    let (mut agent, received) = build_agent(cfg, index, group)?;
    record.received_explanation = received;
    let mut env = cfg.environment.build()?;
    let master = cfg.master_seed;
    for episode in 1..=cfg.episodes {
        let mut rng = rng_for(&[master, index as u64, episode as u64, stream::TRAIN]);
        let mut s = env.reset(&mut rng);
        let mut total = 0.0;
        let mut length = 0;
        let reached = loop {
            let decision = agent.act(&s, episode - 1, &mut rng)?;
            let step = env.step(&decision.action)?;
            total += step.reward;
            length += 1;
            let finished = step.finished();
            let done = step.done;
            let tr = Transition { state: s, decision, reward: step.reward, next_state: step.next_obs, done };
            match agent.learn(&tr) {
                Ok(_) | Err(Error::Numerical(_)) => {}
                Err(e) => return Err(e),
            }
            if finished {
                break done;
            }
            s = tr.next_state;
        };
        record.rewards.push(total);
        record.lengths.push(length);
        record.reached_goal.push(reached);
        record.total_training_reward += total;
        if is_checkpoint(cfg, episode) {
            record.checkpoints.push(take_checkpoint(cfg, &agent, index, episode)?);
        }
    }
    record.skipped_transitions = agent.skipped_transitions();
    record.final_test_reward = record.final_checkpoint().map_or(f64::NEG_INFINITY, Checkpoint::mean_test_reward);
    Ok(agent)
}

/// Learning-free test trials with their explanations. Uses its own random
/// streams, so training continues exactly as it would without it.
pub fn take_checkpoint(cfg: &ExperimentConfig, agent: &Agent, index: usize, episode: usize) -> Result<Checkpoint> {
    let mut env = cfg.environment.build()?;
    let mut cp = Checkpoint {
        episode,
        test_rewards: Vec::new(),
        test_lengths: Vec::new(),
        test_reached_goal: Vec::new(),
        explanations: Vec::new(),
        used_memories: Vec::new(),
    };
    for k in 0..cfg.test_episodes {
        let mut rng = rng_for(&[cfg.master_seed, index as u64, episode as u64, stream::TEST, k as u64]);
        let trace = agent.run_test_trial(&mut env, agent.config().stochastic_test, &mut rng)?;
        let rows = trace.rows();
        let expl = explain::prune(&rows, cfg.threshold).with_provenance(Provenance {
            agent_id: Some(index),
            episode: Some(episode),
            environment: cfg.environment.id().to_string(),
            test_episode: Some(k),
            shuffled: false,
        });
        cp.test_rewards.push(trace.summary.total_reward);
        cp.test_lengths.push(trace.summary.length);
        cp.test_reached_goal.push(trace.summary.reached_goal);
        cp.explanations.push(expl);
        cp.used_memories.push(explain::used_memories(&rows));
    }
    Ok(cp)
}

/// Trains a whole population for one group. Agents run in parallel; the
/// result is independent of scheduling.
pub fn train_group(cfg: &ExperimentConfig, group: &GroupSpec) -> Vec<AgentRun> {
    (0..cfg.population).into_par_iter().map(|i| run_agent(cfg, i, group)).collect()
}

/// Trains the population described by `cfg` (including its configured group).
pub fn train_population(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let group = GroupSpec::from_config(cfg)?;
    Ok(train_group(cfg, &group).into_iter().map(|r| r.record).collect())
}

/// Highest final test reward; ties go to the highest total training reward,
/// then to the lowest agent id. Failed runs are ignored.
pub fn select_best(records: &[RunRecord]) -> Result<usize> {
    let mut best: Option<&RunRecord> = None;
    for r in records.iter().filter(|r| r.failed.is_none()) {
        best = match best {
            None => Some(r),
            Some(b) => {
                let better = r.final_test_reward > b.final_test_reward
                    || (r.final_test_reward == b.final_test_reward
                        && (r.total_training_reward > b.total_training_reward
                            || (r.total_training_reward == b.total_training_reward && r.agent_id < b.agent_id)));
                Some(if better { r } else { b })
            }
        };
    }
    best.map(|r| r.agent_id).ok_or_else(|| Error::config("no successful runs to choose from"))
}

/// Longest episode that still counts as solving the task efficiently:
/// twice the shortest route on grids, any goal-reaching episode otherwise.
pub fn success_length_limit(env: &EnvSpec) -> Option<usize> {
    match env {
        EnvSpec::GridWorld(g) => Some(2 * g.shortest_path_len()),
        EnvSpec::MountainCar(_) => None,
    }
}

/// One-based episode of the first efficient success, or `episodes + 1`.
pub fn episodes_to_success(record: &RunRecord, limit: Option<usize>) -> usize {
    record
        .reached_goal
        .iter()
        .zip(&record.lengths)
        .position(|(&goal, &len)| goal && limit.is_none_or(|l| len <= l))
        .map_or(record.rewards.len() + 1, |i| i + 1)
}
