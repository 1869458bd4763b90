use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{EnvAction, Observation, StateBounds, StepResult};
use crate::error::{Error, Result};

/// The four grid moves. Rows grow downwards, so `Up` decreases `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl GridAction {
    pub const COUNT: usize = 4;
    pub const ALL: [GridAction; 4] = [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right];

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::Type(format!("grid action index {index} out of range 0..4")))
    }

    fn delta(self) -> (i64, i64) {
        match self {
            GridAction::Up => (0, -1),
            GridAction::Down => (0, 1),
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
        }
    }

    pub fn glyph(self) -> char {
        match self {
            GridAction::Up => '^',
            GridAction::Down => 'v',
            GridAction::Left => '<',
            GridAction::Right => '>',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridAction::Up => "up",
            GridAction::Down => "down",
            GridAction::Left => "left",
            GridAction::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRewards {
    #[serde(default = "default_step_reward")]
    pub step: f64,
    #[serde(default = "default_goal_reward")]
    pub goal: f64,
    #[serde(default = "default_penalty_reward")]
    pub penalty: f64,
}

fn default_step_reward() -> f64 {
    -0.05
}
fn default_goal_reward() -> f64 {
    1.0
}
fn default_penalty_reward() -> f64 {
    -1.0
}
fn default_max_steps() -> usize {
    1000
}

impl Default for GridRewards {
    fn default() -> Self {
        Self { step: default_step_reward(), goal: default_goal_reward(), penalty: default_penalty_reward() }
    }
}

/// Static description of a grid world. Cells are `[x, y]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    pub start: [usize; 2],
    pub goal: [usize; 2],
    #[serde(default)]
    pub penalties: Vec<[usize; 2]>,
    #[serde(default)]
    pub rewards: GridRewards,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl GridWorldSpec {
    pub fn new(width: usize, height: usize, start: [usize; 2], goal: [usize; 2]) -> Self {
        Self {
            width,
            height,
            start,
            goal,
            penalties: Vec::new(),
            rewards: GridRewards::default(),
            max_steps: default_max_steps(),
        }
    }

    pub fn with_penalties(mut self, penalties: Vec<[usize; 2]>) -> Self {
        self.penalties = penalties;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("grid width and height must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be positive"));
        }
        for (name, cell) in [("start", self.start), ("goal", self.goal)] {
            if !self.in_bounds(cell) {
                return Err(Error::Config(format!("{name} cell {cell:?} is outside the grid")));
            }
        }
        if self.start == self.goal {
            return Err(Error::config("start and goal cells coincide"));
        }
        for p in &self.penalties {
            if !self.in_bounds(*p) {
                return Err(Error::Config(format!("penalty cell {p:?} is outside the grid")));
            }
            if *p == self.goal {
                return Err(Error::config("goal cell cannot be a penalty cell"));
            }
            if *p == self.start {
                return Err(Error::config("start cell cannot be a penalty cell"));
            }
        }
        for r in [self.rewards.step, self.rewards.goal, self.rewards.penalty] {
            if !r.is_finite() {
                return Err(Error::config("grid rewards must be finite"));
            }
        }
        Ok(())
    }

    pub fn in_bounds(&self, cell: [usize; 2]) -> bool {
        cell[0] < self.width && cell[1] < self.height
    }

    /// Normalization box: `x / (width - 1)`, `y / (height - 1)`.
    pub fn bounds(&self) -> Result<StateBounds> {
        StateBounds::new(
            vec![0.0, 0.0],
            vec![self.width as f64 - 1.0, self.height as f64 - 1.0],
        )
    }

    pub fn is_penalty(&self, cell: [usize; 2]) -> bool {
        self.penalties.contains(&cell)
    }

    /// Converts an observation back to a cell, rejecting non-integer or
    /// out-of-range coordinates.
    pub fn cell_of(&self, obs: &[f64]) -> Result<[usize; 2]> {
        if obs.len() != 2 {
            return Err(Error::Type(format!("grid observation has {} components", obs.len())));
        }
        let mut cell = [0usize; 2];
        for (i, v) in obs.iter().enumerate() {
            let r = v.round();
            if (v - r).abs() > 1e-9 || r < 0.0 {
                return Err(Error::Validation(format!("{obs:?} is not a grid cell")));
            }
            cell[i] = r as usize;
        }
        if !self.in_bounds(cell) {
            return Err(Error::Validation(format!("cell {cell:?} is outside the {}x{} grid", self.width, self.height)));
        }
        Ok(cell)
    }

    /// One deterministic move: `(next_obs, reward, reached_goal)`.
    ///
    /// Moves off the edge leave the agent in place. The step reward is always
    /// paid; goal and penalty rewards are added on top of it.
    pub fn transition(&self, state: &[f64], action: &EnvAction) -> Result<(Observation, f64, bool)> {
        let cell = self.cell_of(state)?;
        let action = GridAction::from_index(action.discrete()?)?;
        let (dx, dy) = action.delta();
        let nx = cell[0] as i64 + dx;
        let ny = cell[1] as i64 + dy;
        let next = if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
            [nx as usize, ny as usize]
        } else {
            cell
        };
        let done = next == self.goal;
        let cell_reward = if done {
            self.rewards.goal
        } else if self.is_penalty(next) {
            self.rewards.penalty
        } else {
            0.0
        };
        Ok((vec![next[0] as f64, next[1] as f64], self.rewards.step + cell_reward, done))
    }

    /// Length of the shortest start→goal route that avoids penalty cells,
    /// falling back to the unrestricted shortest route when penalties wall
    /// the goal off.
    pub fn shortest_path_len(&self) -> usize {
        let avoid: HashSet<[usize; 2]> = self.penalties.iter().copied().collect();
        self.bfs(&avoid).or_else(|| self.bfs(&HashSet::new())).unwrap_or(usize::MAX)
    }

    fn bfs(&self, blocked: &HashSet<[usize; 2]>) -> Option<usize> {
        let mut seen = vec![false; self.width * self.height];
        let mut queue = VecDeque::from([(self.start, 0usize)]);
        seen[self.start[1] * self.width + self.start[0]] = true;
        while let Some((cell, d)) = queue.pop_front() {
            if cell == self.goal {
                return Some(d);
            }
            for a in GridAction::ALL {
                let (dx, dy) = a.delta();
                let nx = cell[0] as i64 + dx;
                let ny = cell[1] as i64 + dy;
                if nx < 0 || ny < 0 || nx as usize >= self.width || ny as usize >= self.height {
                    continue;
                }
                let next = [nx as usize, ny as usize];
                let idx = next[1] * self.width + next[0];
                if seen[idx] || blocked.contains(&next) {
                    continue;
                }
                seen[idx] = true;
                queue.push_back((next, d + 1));
            }
        }
        None
    }
}

/// Stateful grid world: current cell plus the episode step counter.
#[derive(Debug, Clone)]
pub struct GridWorld {
    spec: GridWorldSpec,
    bounds: StateBounds,
    state: Observation,
    steps: usize,
}

impl GridWorld {
    pub fn new(spec: GridWorldSpec) -> Result<Self> {
        spec.validate()?;
        let bounds = spec.bounds()?;
        let state = vec![spec.start[0] as f64, spec.start[1] as f64];
        Ok(Self { spec, bounds, state, steps: 0 })
    }

    pub fn spec(&self) -> &GridWorldSpec {
        &self.spec
    }

    pub fn bounds(&self) -> &StateBounds {
        &self.bounds
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn reset(&mut self) -> Observation {
        self.steps = 0;
        self.state = vec![self.spec.start[0] as f64, self.spec.start[1] as f64];
        self.state.clone()
    }

    pub fn step(&mut self, action: &EnvAction) -> Result<StepResult> {
        let (next, reward, done) = self.spec.transition(&self.state, action)?;
        self.steps += 1;
        self.state = next.clone();
        Ok(StepResult { next_obs: next, reward, done, truncated: !done && self.steps >= self.spec.max_steps })
    }
}
