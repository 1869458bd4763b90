use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvAction, Observation, StateBounds, StepResult};
use crate::error::{Error, Result};

/// Continuous mountain car constants. Defaults follow the widely used gym
/// implementation; `action_cost` scales the squared force penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainCarSpec {
    pub power: f64,
    pub gravity: f64,
    pub goal_position: f64,
    pub goal_reward: f64,
    pub action_cost: f64,
    pub min_position: f64,
    pub max_position: f64,
    pub max_speed: f64,
    pub max_steps: usize,
    pub start_position: [f64; 2],
}

impl Default for MountainCarSpec {
    fn default() -> Self {
        Self {
            power: 0.0015,
            gravity: 0.0025,
            goal_position: 0.45,
            goal_reward: 100.0,
            action_cost: 0.1,
            min_position: -1.2,
            max_position: 0.6,
            max_speed: 0.07,
            max_steps: 1000,
            start_position: [-0.6, -0.4],
        }
    }
}

impl MountainCarSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.power > 0.0 && self.gravity > 0.0 && self.action_cost > 0.0) {
            return Err(Error::config("power, gravity and action_cost must be positive"));
        }
        if !(self.min_position < self.max_position) || !(self.max_speed > 0.0) {
            return Err(Error::config("mountain car state bounds are empty"));
        }
        if !(self.min_position..=self.max_position).contains(&self.goal_position) {
            return Err(Error::config("goal_position lies outside the position bounds"));
        }
        let [lo, hi] = self.start_position;
        if !(lo <= hi) || lo < self.min_position || hi > self.max_position {
            return Err(Error::config("start_position must be an ordered interval inside the position bounds"));
        }
        if !self.goal_reward.is_finite() {
            return Err(Error::config("goal_reward must be finite"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be positive"));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<StateBounds> {
        StateBounds::new(
            vec![self.min_position, -self.max_speed],
            vec![self.max_position, self.max_speed],
        )
    }

    /// Height profile whose negative slope is the gravity term of the
    /// velocity update.
    pub fn potential(&self, position: f64) -> f64 {
        self.gravity / 3.0 * (3.0 * position).sin()
    }

    /// One deterministic step: `(next_obs, reward, reached_goal)`.
    pub fn transition(&self, state: &[f64], action: &EnvAction) -> Result<(Observation, f64, bool)> {
        let force = action.continuous()?;
        if force.len() != 1 {
            return Err(Error::Type(format!("mountain car takes a 1-d force, got {}", force.len())));
        }
        if state.len() != 2 {
            return Err(Error::Type(format!("mountain car state has {} components", state.len())));
        }
        let a = force[0].clamp(-1.0, 1.0);
        let (p, v) = (state[0], state[1]);
        let mut v_next = (v + a * self.power - self.gravity * (3.0 * p).cos()).clamp(-self.max_speed, self.max_speed);
        let p_next = (p + v_next).clamp(self.min_position, self.max_position);
        if p_next == self.min_position {
            v_next = 0.0;
        }
        let done = p_next >= self.goal_position;
        let reward = if done { self.goal_reward } else { 0.0 } - self.action_cost * a * a;
        Ok((vec![p_next, v_next], reward, done))
    }
}

#[derive(Debug, Clone)]
pub struct MountainCar {
    spec: MountainCarSpec,
    bounds: StateBounds,
    state: Observation,
    steps: usize,
}

impl MountainCar {
    pub fn new(spec: MountainCarSpec) -> Result<Self> {
        spec.validate()?;
        let bounds = spec.bounds()?;
        let state = vec![spec.start_position[0], 0.0];
        Ok(Self { spec, bounds, state, steps: 0 })
    }

    pub fn spec(&self) -> &MountainCarSpec {
        &self.spec
    }

    pub fn bounds(&self) -> &StateBounds {
        &self.bounds
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Observation {
        let [lo, hi] = self.spec.start_position;
        let position = if lo == hi { lo } else { rng.random_range(lo..hi) };
        self.steps = 0;
        self.state = vec![position, 0.0];
        self.state.clone()
    }

    pub fn step(&mut self, action: &EnvAction) -> Result<StepResult> {
        let (next, reward, done) = self.spec.transition(&self.state, action)?;
        self.steps += 1;
        self.state = next.clone();
        Ok(StepResult { next_obs: next, reward, done, truncated: !done && self.steps >= self.spec.max_steps })
    }
}
