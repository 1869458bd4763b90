use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{episodes_to_success, select_best, success_length_limit, train_group, ExperimentConfig, GroupSpec, RunRecord};
use crate::error::{Error, Result};

/// Per-episode population statistics for one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCurves {
    pub mean_reward: Vec<f64>,
    pub std_reward: Vec<f64>,
    pub mean_length: Vec<f64>,
    /// Trailing moving average of `mean_reward`.
    pub smoothed_mean_reward: Vec<f64>,
    pub best_agent_reward: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    /// Sum over episodes of the population-mean reward.
    pub auc: f64,
    /// Mean one-based episode of each agent's first efficient success.
    pub mean_episodes_to_success: f64,
    pub first_50_mean_reward: f64,
    pub final_100_mean_reward: f64,
    pub best_agent: Option<usize>,
    pub failed_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub name: String,
    pub records: Vec<RunRecord>,
    pub curves: GroupCurves,
    pub summary: GroupSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub smoothing_window: usize,
    pub groups: Vec<GroupReport>,
}

impl ComparisonReport {
    pub fn group(&self, name: &str) -> Option<&GroupReport> {
        self.groups.iter().find(|g| g.name == name)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn smooth(xs: &[f64], window: usize) -> Vec<f64> {
    (0..xs.len()).map(|i| mean(xs[i.saturating_sub(window - 1)..=i].iter().copied())).collect()
}

impl GroupReport {
    /// Aggregates finished runs. Failed runs are counted but excluded from
    /// the curves.
    pub fn build(name: &str, records: Vec<RunRecord>, cfg: &ExperimentConfig) -> Self {
        let ok: Vec<&RunRecord> = records.iter().filter(|r| r.failed.is_none()).collect();
        let n_ep = cfg.episodes;
        let column = |ep: usize, f: &dyn Fn(&RunRecord, usize) -> f64| mean(ok.iter().map(|r| f(r, ep)));
        let mean_reward: Vec<f64> = (0..n_ep).map(|e| column(e, &|r, e| r.rewards[e])).collect();
        let std_reward = (0..n_ep)
            .map(|e| {
                let m = mean_reward[e];
                column(e, &|r, e| (r.rewards[e] - m).powi(2)).sqrt()
            })
            .collect();
        let mean_length = (0..n_ep).map(|e| column(e, &|r, e| r.lengths[e] as f64)).collect();
        let best_agent = select_best(&records).ok();
        let best_agent_reward = best_agent
            .and_then(|id| records.iter().find(|r| r.agent_id == id))
            .map_or_else(|| vec![0.0; n_ep], |r| r.rewards.clone());
        let limit = success_length_limit(&cfg.environment);
        let summary = GroupSummary {
            auc: mean_reward.iter().sum(),
            mean_episodes_to_success: mean(ok.iter().map(|r| episodes_to_success(r, limit) as f64)),
            first_50_mean_reward: mean(mean_reward.iter().take(50).copied()),
            final_100_mean_reward: mean(mean_reward.iter().skip(n_ep.saturating_sub(100)).copied()),
            best_agent,
            failed_runs: records.len() - ok.len(),
        };
        let curves = GroupCurves {
            smoothed_mean_reward: smooth(&mean_reward, cfg.smoothing_window),
            mean_reward,
            std_reward,
            mean_length,
            best_agent_reward,
        };
        Self { name: name.to_string(), records, curves, summary }
    }
}

/// Trains every group with seed-matched agents (agent `i` shares its
/// initialization and environment streams across groups) and aggregates.
pub fn run_group_comparison(cfg: &ExperimentConfig, groups: &[GroupSpec]) -> Result<ComparisonReport> {
    cfg.validate()?;
    if groups.is_empty() {
        return Err(Error::config("a comparison needs at least one group"));
    }
    let reports = groups
        .iter()
        .map(|g| {
            let records = train_group(cfg, g).into_iter().map(|r| r.record).collect();
            GroupReport::build(&g.name, records, cfg)
        })
        .collect();
    Ok(ComparisonReport { smoothing_window: cfg.smoothing_window, groups: reports })
}

/// Writes `<group>.csv` per group plus `summary.json` into `dir`.
pub fn write_report(report: &ComparisonReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    for g in &report.groups {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", g.name))).map_err(csv_err)?;
        w.write_record(["episode", "mean_reward", "std_reward", "mean_length", "best_agent_reward", "smoothed_mean_reward"])
            .map_err(csv_err)?;
        let c = &g.curves;
        for e in 0..c.mean_reward.len() {
            w.write_record(&[
                (e + 1).to_string(),
                c.mean_reward[e].to_string(),
                c.std_reward[e].to_string(),
                c.mean_length[e].to_string(),
                c.best_agent_reward[e].to_string(),
                c.smoothed_mean_reward[e].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    let summary = serde_json::json!({
        "smoothing_window": report.smoothing_window,
        "smoothing": "trailing mean applied after population averaging",
        "groups": report.groups.iter().map(|g| (g.name.clone(), serde_json::to_value(&g.summary).unwrap()))
            .collect::<serde_json::Map<_, _>>(),
    });
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary).unwrap())?;
    Ok(())
}
