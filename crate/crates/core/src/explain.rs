//! Explanations: the short, ordered list of memories an agent relied on
//! during a test trial.
//!
//! A trial yields one [`TraceRow`] per step. [`prune`] keeps, for every
//! memory, the row where it carried the most weight, drops memories whose
//! best weight does not exceed the threshold, and orders the survivors by
//! when their kept row happened. [`OnlineExplainer`] reaches the same result
//! in a single pass without storing the trace.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::env::{EnvAction, Environment};
use crate::error::{from_json_str, Error, Result};

/// Schema version written to and required from explanation files.
pub const EXPLANATION_VERSION: u64 = 1;

/// One step of a test trial, seen through the episodic memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    /// Index of the best matching unit; identifies the memory.
    pub unit: usize,
    /// BMU weights (normalized coordinates).
    pub memory: Vec<f64>,
    /// BMU weights mapped back to environment coordinates.
    pub memory_raw: Vec<f64>,
    pub value: f64,
    pub beta: f64,
    pub action: EnvAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplanationEntry {
    pub t: usize,
    pub state_raw: Vec<f64>,
    pub state_norm: Vec<f64>,
    pub value: f64,
    pub action: EnvAction,
    pub beta: f64,
}

impl From<&TraceRow> for ExplanationEntry {
    fn from(row: &TraceRow) -> Self {
        Self {
            t: row.t,
            state_raw: row.memory_raw.clone(),
            state_norm: row.memory.clone(),
            value: row.value,
            action: row.action.clone(),
            beta: row.beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Provenance {
    pub agent_id: Option<usize>,
    /// Training episodes completed by the source agent.
    pub episode: Option<usize>,
    pub environment: String,
    pub test_episode: Option<usize>,
    pub shuffled: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Explanation {
    pub entries: Vec<ExplanationEntry>,
    pub threshold: f64,
    pub provenance: Provenance,
}

/// Keeps the max-β row per memory (earliest on ties), in first-seen order.
fn best_row_per_memory(trace: &[TraceRow]) -> Vec<&TraceRow> {
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut best: Vec<&TraceRow> = Vec::new();
    for row in trace {
        match slot.get(&row.unit) {
            Some(&i) => {
                if row.beta > best[i].beta {
                    best[i] = row;
                }
            }
            None => {
                slot.insert(row.unit, best.len());
                best.push(row);
            }
        }
    }
    best
}

/// Every memory used in a trace, each with its max-β row, ordered by the
/// time of that row.
pub fn used_memories(trace: &[TraceRow]) -> Vec<TraceRow> {
    let mut rows: Vec<TraceRow> = best_row_per_memory(trace).into_iter().cloned().collect();
    rows.sort_by_key(|r| r.t);
    rows
}

/// Offline pruning of a complete trace.
pub fn prune(trace: &[TraceRow], threshold: f64) -> Explanation {
    let mut kept: Vec<&TraceRow> = best_row_per_memory(trace).into_iter().filter(|r| r.beta > threshold).collect();
    kept.sort_by_key(|r| r.t);
    Explanation {
        entries: kept.into_iter().map(ExplanationEntry::from).collect(),
        threshold,
        provenance: Provenance::default(),
    }
}

/// Streaming form of [`prune`]: rows above the threshold are appended; a
/// memory already listed is moved to the back when it is seen again with a
/// strictly higher β.
#[derive(Debug, Clone)]
pub struct OnlineExplainer {
    threshold: f64,
    rows: Vec<TraceRow>,
}

impl OnlineExplainer {
    pub fn new(threshold: f64) -> Self {
        Self { threshold, rows: Vec::new() }
    }

    pub fn push(&mut self, row: &TraceRow) {
        if row.beta <= self.threshold {
            return;
        }
        match self.rows.iter().position(|r| r.unit == row.unit) {
            Some(i) if row.beta > self.rows[i].beta => {
                self.rows.remove(i);
                self.rows.push(row.clone());
            }
            Some(_) => {}
            None => self.rows.push(row.clone()),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn finish(self) -> Explanation {
        Explanation {
            entries: self.rows.iter().map(ExplanationEntry::from).collect(),
            threshold: self.threshold,
            provenance: Provenance::default(),
        }
    }
}

/// Runs a learning-free test trial and explains it on the fly.
pub fn generate_online<R: Rng + ?Sized>(
    agent: &Agent,
    env: &mut Environment,
    threshold: f64,
    stochastic: bool,
    rng: &mut R,
) -> Result<Explanation> {
    let mut explainer = OnlineExplainer::new(threshold);
    agent.test_trial_with(env, stochastic, rng, |step| {
        if let Some(row) = step.row() {
            explainer.push(&row);
        }
    })?;
    let mut expl = explainer.finish();
    expl.provenance.environment = env.spec().id().to_string();
    Ok(expl)
}

/// Control explanation: `target_size` memories drawn uniformly from those
/// used in the trace, each with its max-β row, ordered by time.
pub fn shuffle_baseline<R: Rng + ?Sized>(trace: &[TraceRow], target_size: usize, rng: &mut R) -> Result<Explanation> {
    let mut candidates = best_row_per_memory(trace);
    if target_size > candidates.len() {
        return Err(Error::Config(format!(
            "cannot sample {target_size} memories from a trace that used {}",
            candidates.len()
        )));
    }
    candidates.sort_by_key(|r| r.t);
    let mut picks = rand::seq::index::sample(rng, candidates.len(), target_size).into_vec();
    picks.sort_unstable();
    Ok(Explanation {
        entries: picks.into_iter().map(|i| ExplanationEntry::from(candidates[i])).collect(),
        threshold: 0.0,
        provenance: Provenance { shuffled: true, ..Provenance::default() },
    })
}

#[derive(Serialize)]
struct FileOut<'a> {
    version: u64,
    provenance: &'a Provenance,
    threshold: f64,
    entries: &'a [ExplanationEntry],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileIn {
    #[allow(dead_code)]
    version: u64,
    #[serde(default)]
    provenance: Provenance,
    threshold: f64,
    entries: Vec<ExplanationEntry>,
}

impl Explanation {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Checks the structural invariants: β in `[0, 1]` and at least the
    /// threshold, strictly increasing `t`, distinct memories, finite numbers.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::Validation(format!("threshold {} is outside [0, 1)", self.threshold)));
        }
        for (i, e) in self.entries.iter().enumerate() {
            let at = |msg: String| Error::Validation(format!("entries[{i}]: {msg}"));
            if !(0.0..=1.0).contains(&e.beta) {
                return Err(at(format!("beta {} is outside [0, 1]", e.beta)));
            }
            if e.beta < self.threshold {
                return Err(at(format!("beta {} is below the threshold {}", e.beta, self.threshold)));
            }
            if !e.value.is_finite() || e.state_norm.iter().chain(&e.state_raw).any(|v| !v.is_finite()) {
                return Err(at("non-finite number".into()));
            }
            if e.state_norm.len() != e.state_raw.len() {
                return Err(at("state_norm and state_raw differ in length".into()));
            }
            if i > 0 {
                if e.t <= self.entries[i - 1].t {
                    return Err(at(format!("t {} does not increase", e.t)));
                }
                if self.entries[..i].iter().any(|o| o.state_norm == e.state_norm) {
                    return Err(at("memory appears twice".into()));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = FileOut {
            version: EXPLANATION_VERSION,
            provenance: &self.provenance,
            threshold: self.threshold,
            entries: &self.entries,
        };
        serde_json::to_string_pretty(&file).expect("explanations always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: ".".into(),
            message: format!("{} (line {}, column {})", e, e.line(), e.column()),
        })?;
        let version = value.get("version").ok_or_else(|| Error::Parse {
            path: "version".into(),
            message: "missing field".into(),
        })?;
        let version = version.as_u64().ok_or_else(|| Error::Parse {
            path: "version".into(),
            message: "expected an unsigned integer".into(),
        })?;
        if version != EXPLANATION_VERSION {
            return Err(Error::UnsupportedVersion { found: version, supported: EXPLANATION_VERSION });
        }
        let file: FileIn = from_json_str(text)?;
        let expl = Explanation { entries: file.entries, threshold: file.threshold, provenance: file.provenance };
        expl.validate()?;
        Ok(expl)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read explanation {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
