//! TD-gated self-organizing map used as the agent's episodic memory.
//!
//! Units sit on a `width × height` lattice (unit `j` at column `j % width`,
//! row `j / width`) and hold a weight vector in the normalized state cube
//! plus one tabular value per action. The plasticity of the weights is
//! scaled by the value network's TD error instead of a global schedule.

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::EnvAction;
use crate::error::{Error, Result};
use crate::explain::Explanation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SomConfig {
    pub width: usize,
    pub height: usize,
    /// Largest weight learning rate, reached when `|td| >= td_norm`.
    pub alpha_max: f64,
    /// Neighbourhood width (lattice units) at full gating.
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Temperature of the proximity kernel `exp(−d²/tau)`.
    pub tau: f64,
    pub value_lr: f64,
    pub td_norm: f64,
}

impl Default for SomConfig {
    fn default() -> Self {
        Self {
            width: 6,
            height: 6,
            alpha_max: 0.5,
            sigma_max: 1.0,
            sigma_min: 0.1,
            tau: 1.0,
            value_lr: 0.2,
            td_norm: 1.0,
        }
    }
}

impl SomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("SOM lattice dimensions must be positive"));
        }
        let positive = [
            ("alpha_max", self.alpha_max),
            ("sigma_max", self.sigma_max),
            ("sigma_min", self.sigma_min),
            ("tau", self.tau),
            ("value_lr", self.value_lr),
            ("td_norm", self.td_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("SOM {name} must be positive and finite, got {v}")));
            }
        }
        if self.sigma_min > self.sigma_max {
            return Err(Error::config("SOM sigma_min exceeds sigma_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomUnit {
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub frozen: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stored_action: Option<EnvAction>,
}

/// Proximity kernel `exp(−distance²/tau)`, in `(0, 1]`.
pub fn beta(distance: f64, tau: f64) -> f64 {
    (-(distance * distance) / tau).exp()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Som {
    config: SomConfig,
    units: Vec<SomUnit>,
}

impl Som {
    /// Weights uniform in the unit cube, values zero.
    pub fn new<R: Rng + ?Sized>(config: SomConfig, dim: usize, n_values: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if dim == 0 || n_values == 0 {
            return Err(Error::config("SOM units need at least one weight and one value"));
        }
        let units = (0..config.width * config.height)
            .map(|_| SomUnit {
                weights: (0..dim).map(|_| rng.random::<f64>()).collect(),
                values: vec![0.0; n_values],
                frozen: false,
                stored_action: None,
            })
            .collect();
        Ok(Self { config, units })
    }

    /// Builds a map from explicit units, e.g. when loading a checkpoint.
    pub fn from_units(config: SomConfig, units: Vec<SomUnit>) -> Result<Self> {
        config.validate()?;
        if units.len() != config.width * config.height {
            return Err(Error::Validation(format!(
                "SOM lattice {}x{} needs {} units, found {}",
                config.width,
                config.height,
                config.width * config.height,
                units.len()
            )));
        }
        if let Some(first) = units.first() {
            let (d, k) = (first.weights.len(), first.values.len());
            for (i, u) in units.iter().enumerate() {
                if u.weights.len() != d || u.values.len() != k {
                    return Err(Error::Validation(format!("SOM unit {i} has mismatched dimensions")));
                }
                if u.weights.iter().chain(&u.values).any(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!("SOM unit {i} holds non-finite numbers")));
                }
                if u.frozen && u.stored_action.is_none() {
                    return Err(Error::Validation(format!("frozen SOM unit {i} has no stored action")));
                }
            }
        }
        Ok(Self { config, units })
    }

    pub fn config(&self) -> &SomConfig {
        &self.config
    }

    pub fn units(&self) -> &[SomUnit] {
        &self.units
    }

    pub fn unit(&self, index: usize) -> &SomUnit {
        &self.units[index]
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn frozen_count(&self) -> usize {
        self.units.iter().filter(|u| u.frozen).count()
    }

    pub fn tau(&self) -> f64 {
        self.config.tau
    }

    fn lattice_pos(&self, j: usize) -> (f64, f64) {
        ((j % self.config.width) as f64, (j / self.config.width) as f64)
    }

    /// Best matching unit for a normalized state: `(index, distance)`. Ties
    /// go to the lowest index.
    pub fn bmu(&self, s_norm: &[f64]) -> Result<(usize, f64)> {
        let first = self.units.first().ok_or_else(|| Error::config("SOM has no units"))?;
        if first.weights.len() != s_norm.len() {
            return Err(Error::Type(format!(
                "state has {} components, SOM weights have {}",
                s_norm.len(),
                first.weights.len()
            )));
        }
        let mut best = (0, f64::INFINITY);
        for (j, u) in self.units.iter().enumerate() {
            let d2: f64 = u.weights.iter().zip(s_norm).map(|(w, s)| (w - s) * (w - s)).sum();
            if d2 < best.1 {
                best = (j, d2);
            }
        }
        Ok((best.0, euclidean(&self.units[best.0].weights, s_norm)))
    }

    /// Gated competitive update. With `rho = min(1, |td|/td_norm)` every
    /// unfrozen unit moves toward `s_norm` by
    /// `alpha_max·rho · exp(−lattice_dist²/(2σ²))`, `σ = max(sigma_min, sigma_max·rho)`.
    pub fn update_weights(&mut self, s_norm: &[f64], td_dnn: f64) -> Result<()> {
        if !td_dnn.is_finite() {
            return Err(Error::Numerical(format!("non-finite TD error {td_dnn}")));
        }
        let (b, _) = self.bmu(s_norm)?;
        if td_dnn == 0.0 {
            return Ok(());
        }
        let rho = (td_dnn.abs() / self.config.td_norm).min(1.0);
        let alpha = self.config.alpha_max * rho;
        let sigma = (self.config.sigma_max * rho).max(self.config.sigma_min);
        let two_sigma_sq = 2.0 * sigma * sigma;
        let (bx, by) = self.lattice_pos(b);
        for j in 0..self.units.len() {
            if self.units[j].frozen {
                continue;
            }
            let (x, y) = self.lattice_pos(j);
            let lattice_d2 = (x - bx).powi(2) + (y - by).powi(2);
            let h = alpha * (-lattice_d2 / two_sigma_sq).exp();
            if h == 0.0 {
                continue;
            }
            for (w, s) in self.units[j].weights.iter_mut().zip(s_norm) {
                *w += h * (s - *w);
            }
        }
        Ok(())
    }

    /// Tabular value update `values[a] += value_lr · td_som`; frozen units
    /// ignore it.
    pub fn update_value(&mut self, unit: usize, action: usize, td_som: f64) -> Result<()> {
        if !td_som.is_finite() {
            return Err(Error::Numerical(format!("non-finite SOM TD error {td_som}")));
        }
        let n = self.units.len();
        let u = self
            .units
            .get_mut(unit)
            .ok_or_else(|| Error::Type(format!("SOM unit {unit} out of range 0..{n}")))?;
        let k = u.values.len();
        let v = u
            .values
            .get_mut(action)
            .ok_or_else(|| Error::Type(format!("value index {action} out of range 0..{k}")))?;
        if !u.frozen {
            *v += self.config.value_lr * td_som;
        }
        Ok(())
    }

    /// Writes each explanation entry into a distinct, uniformly chosen unit
    /// and freezes it. Every value slot of a seeded unit takes the entry's
    /// value.
    pub fn seed<R: Rng + ?Sized>(&mut self, explanation: &Explanation, rng: &mut R) -> Result<()> {
        let n = explanation.entries.len();
        if n > self.units.len() {
            return Err(Error::Config(format!(
                "explanation has {n} entries but the SOM only {} units",
                self.units.len()
            )));
        }
        let dim = self.units[0].weights.len();
        for e in &explanation.entries {
            if e.state_norm.len() != dim {
                return Err(Error::Type(format!(
                    "explanation state has {} components, SOM weights have {dim}",
                    e.state_norm.len()
                )));
            }
        }
        let picks = rand::seq::index::sample(rng, self.units.len(), n);
        for (unit, entry) in picks.iter().zip(&explanation.entries) {
            let u = &mut self.units[unit];
            u.weights.clone_from(&entry.state_norm);
            u.values.iter_mut().for_each(|v| *v = entry.value);
            u.frozen = true;
            u.stored_action = Some(entry.action.clone());
        }
        Ok(())
    }

    /// Digest over every frozen unit's weights, values and stored action.
    pub fn frozen_digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (j, u) in self.units.iter().enumerate().filter(|(_, u)| u.frozen) {
            j.hash(&mut h);
            hash_unit(u, &mut h);
        }
        h.finish()
    }

    /// Digest over the whole map.
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for u in &self.units {
            hash_unit(u, &mut h);
        }
        h.finish()
    }
}

fn hash_unit(u: &SomUnit, h: &mut DefaultHasher) {
    u.weights.iter().for_each(|w| w.to_bits().hash(h));
    u.values.iter().for_each(|v| v.to_bits().hash(h));
    u.frozen.hash(h);
    match &u.stored_action {
        None => 0u8.hash(h),
        Some(EnvAction::Discrete(i)) => {
            1u8.hash(h);
            i.hash(h);
        }
        Some(EnvAction::Continuous(f)) => {
            2u8.hash(h);
            f.iter().for_each(|x| x.to_bits().hash(h));
        }
    }
}
