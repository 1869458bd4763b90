use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::agent::AgentConfig;
use crate::env::EnvSpec;
use crate::error::{from_json_str, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Reduced populations and episode counts for quick runs and CI.
    #[default]
    DeskScale,
    PaperScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    #[default]
    None,
    Explanation,
    Shuffled,
}

/// Everything needed to train one population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub environment: EnvSpec,
    pub agent: AgentConfig,
    pub population: usize,
    pub episodes: usize,
    pub checkpoint_every: Option<usize>,
    /// β threshold used to prune checkpoint explanations.
    pub threshold: f64,
    pub group: GroupKind,
    /// Explanation files handed to a guided group.
    pub explanations: Vec<PathBuf>,
    /// Test trials (and explanations) per checkpoint.
    pub test_episodes: usize,
    pub master_seed: u64,
    /// Trailing window of the smoothed reward curve.
    pub smoothing_window: usize,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset, environment: EnvSpec) -> Self {
        let agent = AgentConfig::for_env(&environment);
        let grid = matches!(environment, EnvSpec::GridWorld(_));
        let (population, episodes, checkpoint_every, test_episodes) = match (preset, grid) {
            (Preset::PaperScale, true) => (12, 1000, Some(200), 1),
            (Preset::PaperScale, false) => (50, 1000, None, 20),
            (Preset::DeskScale, true) => (6, 400, Some(200), 1),
            (Preset::DeskScale, false) => (6, 400, None, 20),
        };
        Self {
            preset,
            environment,
            agent,
            population,
            episodes,
            checkpoint_every,
            threshold: 0.5,
            group: GroupKind::None,
            explanations: Vec::new(),
            test_episodes,
            master_seed: 0,
            smoothing_window: 5,
        }
    }

    /// Parses a config document. Missing fields fall back to the preset
    /// defaults for the document's environment, field by field.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with_overrides(text, &Value::Object(Default::default()))
    }

    /// Like [`from_json`](Self::from_json), with `overrides` merged over the
    /// document before defaults are filled in.
    pub fn from_json_with_overrides(text: &str, overrides: &Value) -> Result<Self> {
        let mut doc: Value = from_json_str(text)?;
        if !doc.is_object() {
            return Err(Error::Parse { path: ".".into(), message: "config must be a JSON object".into() });
        }
        merge(&mut doc, overrides);
        let env_value = doc
            .get("environment")
            .cloned()
            .ok_or_else(|| Error::Parse { path: "environment".into(), message: "missing field".into() })?;
        let environment: EnvSpec = from_json_str(&env_value.to_string()).map_err(|e| match e {
            Error::Parse { path, message } => Error::Parse { path: format!("environment.{path}"), message },
            other => other,
        })?;
        let preset: Preset = match doc.get("preset") {
            Some(p) => from_json_str(&p.to_string())
                .map_err(|_| Error::Parse { path: "preset".into(), message: format!("unknown preset {p}") })?,
            None => Preset::default(),
        };
        let mut full = serde_json::to_value(Self::preset(preset, environment)).expect("config serializes");
        merge(&mut full, &doc);
        let cfg: Self = from_json_str(&full.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        self.agent.validate()?;
        if self.population == 0 || self.episodes == 0 || self.test_episodes == 0 {
            return Err(Error::config("population, episodes and test_episodes must be positive"));
        }
        if let Some(every) = self.checkpoint_every {
            if every == 0 || self.episodes % every != 0 {
                return Err(Error::Config(format!(
                    "checkpoint_every ({every}) must divide the episode count ({})",
                    self.episodes
                )));
            }
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("explanation threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if self.group != GroupKind::None && self.explanations.is_empty() {
            return Err(Error::config("guided groups need at least one explanation file"));
        }
        if self.smoothing_window == 0 {
            return Err(Error::config("smoothing_window must be positive"));
        }
        Ok(())
    }

    /// Short digest of the effective configuration.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        hex::encode(&digest[..6])
    }

    /// Run directory name: config hash plus a caller-supplied timestamp.
    pub fn run_dir_name(&self, timestamp: &str) -> String {
        format!("{}-{}", self.hash(), timestamp)
    }
}

/// Recursive object merge; non-object values in `overlay` replace `base`.
pub fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}
