//! Episodic environments: a discrete grid world and the continuous
//! mountain car, behind one reset/step interface.

mod grid;
mod mountain_car;

pub use grid::{GridAction, GridRewards, GridWorld, GridWorldSpec};
pub use mountain_car::{MountainCar, MountainCarSpec};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw environment state. Both bundled tasks use two components.
pub type Observation = Vec<f64>;

/// An action handed to an environment.
///
/// Serialized untagged: a bare integer is a discrete action, an array of
/// numbers is a continuous force vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvAction {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl EnvAction {
    pub fn discrete(&self) -> Result<usize> {
        match self {
            EnvAction::Discrete(i) => Ok(*i),
            EnvAction::Continuous(_) => Err(Error::Type("expected a discrete action".into())),
        }
    }

    pub fn continuous(&self) -> Result<&[f64]> {
        match self {
            EnvAction::Continuous(f) => Ok(f),
            EnvAction::Discrete(_) => Err(Error::Type("expected a continuous action".into())),
        }
    }

    /// Euclidean norm of a continuous action, the index for a discrete one.
    pub fn magnitude(&self) -> f64 {
        match self {
            EnvAction::Discrete(i) => *i as f64,
            EnvAction::Continuous(f) => f.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_obs: Observation,
    pub reward: f64,
    /// Goal reached.
    pub done: bool,
    /// Step cap reached without reaching the goal.
    pub truncated: bool,
}

impl StepResult {
    pub fn finished(&self) -> bool {
        self.done || self.truncated
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous { dim: usize, low: f64, high: f64 },
}

/// Axis-aligned box used to map raw observations into the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl StateBounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.len() != high.len() || low.is_empty() {
            return Err(Error::config("state bounds must be non-empty and of equal length"));
        }
        for (i, (l, h)) in low.iter().zip(&high).enumerate() {
            if !(h - l).is_finite() || h - l <= 0.0 {
                return Err(Error::Config(format!(
                    "state bound {i} has zero or negative width ({l}..{h})"
                )));
            }
        }
        Ok(Self { low, high })
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn normalize(&self, obs: &[f64]) -> Result<Observation> {
        self.check_dim(obs)?;
        Ok(obs
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(x, (l, h))| (x - l) / (h - l))
            .collect())
    }

    pub fn denormalize(&self, norm: &[f64]) -> Result<Observation> {
        self.check_dim(norm)?;
        Ok(norm
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(u, (l, h))| l + u * (h - l))
            .collect())
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Type(format!(
                "observation has {} components, expected {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Serializable description of an environment, as found in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    GridWorld(GridWorldSpec),
    MountainCar(MountainCarSpec),
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::GridWorld(g) => g.validate(),
            EnvSpec::MountainCar(m) => m.validate(),
        }
    }

    pub fn build(&self) -> Result<Environment> {
        Ok(match self {
            EnvSpec::GridWorld(g) => Environment::Grid(GridWorld::new(g.clone())?),
            EnvSpec::MountainCar(m) => Environment::MountainCar(MountainCar::new(m.clone())?),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            EnvSpec::GridWorld(_) => "grid_world",
            EnvSpec::MountainCar(_) => "mountain_car",
        }
    }

    pub fn bounds(&self) -> Result<StateBounds> {
        match self {
            EnvSpec::GridWorld(g) => g.bounds(),
            EnvSpec::MountainCar(m) => m.bounds(),
        }
    }

    pub fn action_space(&self) -> ActionSpace {
        match self {
            EnvSpec::GridWorld(_) => ActionSpace::Discrete(GridAction::COUNT),
            EnvSpec::MountainCar(_) => ActionSpace::Continuous { dim: 1, low: -1.0, high: 1.0 },
        }
    }

    pub fn max_steps(&self) -> usize {
        match self {
            EnvSpec::GridWorld(g) => g.max_steps,
            EnvSpec::MountainCar(m) => m.max_steps,
        }
    }
}

/// A running environment instance.
#[derive(Debug, Clone)]
pub enum Environment {
    Grid(GridWorld),
    MountainCar(MountainCar),
}

impl Environment {
    /// Starts a new episode. Only the mountain car draws from `rng`.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Observation {
        match self {
            Environment::Grid(g) => g.reset(),
            Environment::MountainCar(m) => m.reset(rng),
        }
    }

    pub fn step(&mut self, action: &EnvAction) -> Result<StepResult> {
        match self {
            Environment::Grid(g) => g.step(action),
            Environment::MountainCar(m) => m.step(action),
        }
    }

    pub fn spec(&self) -> EnvSpec {
        match self {
            Environment::Grid(g) => EnvSpec::GridWorld(g.spec().clone()),
            Environment::MountainCar(m) => EnvSpec::MountainCar(m.spec().clone()),
        }
    }

    pub fn bounds(&self) -> StateBounds {
        match self {
            Environment::Grid(g) => g.bounds().clone(),
            Environment::MountainCar(m) => m.bounds().clone(),
        }
    }

    pub fn action_space(&self) -> ActionSpace {
        match self {
            Environment::Grid(_) => ActionSpace::Discrete(GridAction::COUNT),
            Environment::MountainCar(_) => ActionSpace::Continuous { dim: 1, low: -1.0, high: 1.0 },
        }
    }

    pub fn max_steps(&self) -> usize {
        match self {
            Environment::Grid(g) => g.spec().max_steps,
            Environment::MountainCar(m) => m.spec().max_steps,
        }
    }

    pub fn normalize(&self, obs: &[f64]) -> Result<Observation> {
        match self {
            Environment::Grid(g) => g.bounds().normalize(obs),
            Environment::MountainCar(m) => m.bounds().normalize(obs),
        }
    }
}
