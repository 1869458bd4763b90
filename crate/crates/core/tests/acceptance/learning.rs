//! Scaled-down learning experiments over master seeds 1 to 5.
//!
//! Source populations and group comparisons are computed once per seed and
//! shared between the criteria that read them.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use ctdl::explain::shuffle_baseline;
use ctdl::harness::*;
use ctdl::seed::rng_for;
use ctdl::*;

use super::Outcome;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
/// Offset between a seed's source population and its receiver groups.
const RECEIVER_OFFSET: u64 = 1000;
/// Stream for drawing shuffled controls.
const SHUFFLE_TAG: u64 = 99;

fn grid_world() -> EnvSpec {
    let penalties = vec![[2, 2], [3, 2], [4, 2], [5, 2], [6, 6], [7, 6], [8, 6], [2, 7], [3, 7], [5, 4]];
    EnvSpec::GridWorld(GridWorldSpec::new(10, 10, [0, 0], [9, 9]).with_penalties(penalties))
}

fn grid_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Preset::DeskScale, grid_world());
    cfg.master_seed = seed;
    cfg.population = 6;
    cfg.episodes = 1000;
    cfg.checkpoint_every = Some(200);
    cfg.test_episodes = 1;
    cfg
}

fn mc_config(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Preset::DeskScale, EnvSpec::MountainCar(MountainCarSpec::default()));
    cfg.master_seed = seed;
    cfg.population = 12;
    cfg.episodes = 300;
    cfg.checkpoint_every = None;
    cfg.test_episodes = 20;
    cfg
}

fn receivers(cfg: &ExperimentConfig, population: usize, episodes: usize) -> ExperimentConfig {
    let mut g = cfg.clone();
    g.master_seed = cfg.master_seed + RECEIVER_OFFSET;
    g.population = population;
    g.episodes = episodes;
    g.checkpoint_every = None;
    g.test_episodes = 1;
    g
}

/// Everything the grid criteria read for one seed.
struct GridSeed {
    /// Selectivity at episode 600: (entries, test-trial length).
    selectivity: (usize, usize),
    report: ComparisonReport,
}

struct McSource {
    explanations: Vec<Explanation>,
    shuffled: Vec<Explanation>,
    goal_trials: usize,
}

fn grid_seed(seed: u64) -> &'static GridSeed {
    static CACHE: OnceLock<Mutex<HashMap<u64, &'static GridSeed>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&seed) {
        return hit;
    }
    let computed: &'static GridSeed = Box::leak(Box::new(compute_grid_seed(seed)));
    cache.lock().unwrap().insert(seed, computed);
    computed
}

fn compute_grid_seed(seed: u64) -> GridSeed {
    let cfg = grid_config(seed);
    let source = train_population(&cfg).expect("grid source population");

    // Test trials never feed back into training, so the first 600 episodes
    // of these runs are exactly a 600-episode population.
    let at_600: Vec<RunRecord> = source
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.checkpoints.retain(|c| c.episode <= 600);
            r.final_test_reward = r.checkpoint(600).expect("checkpoint 600").mean_test_reward();
            r.total_training_reward = r.rewards[..600].iter().sum();
            r
        })
        .collect();
    let best_600 = select_best(&at_600).expect("a finished agent");
    let cp = at_600[best_600].checkpoint(600).unwrap();
    let selectivity = (cp.explanations[0].len(), cp.test_lengths[0]);

    let best = select_best(&source).expect("a finished agent");
    let late = source[best].checkpoint(1000).unwrap();
    let early = source[best].checkpoint(200).unwrap();
    let explanation = late.explanations[0].clone();
    let shuffled = shuffle_baseline(&late.used_memories[0], explanation.len(), &mut rng_for(&[seed, SHUFFLE_TAG]))
        .expect("shuffled control");
    let groups = [
        GroupSpec::none("none"),
        GroupSpec::guided("explanation", vec![explanation]),
        GroupSpec::guided("shuffled", vec![shuffled]),
        GroupSpec::guided("explanation-200", vec![early.explanations[0].clone()]),
    ];
    let report = run_group_comparison(&receivers(&cfg, 6, 600), &groups).expect("grid comparison");
    GridSeed { selectivity, report }
}

fn mc_source(seed: u64) -> &'static McSource {
    static CACHE: OnceLock<Mutex<HashMap<u64, &'static McSource>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&seed) {
        return hit;
    }
    let cfg = mc_config(seed);
    let source = train_population(&cfg).expect("mountain car source population");
    let best = select_best(&source).expect("a finished agent");
    let cp = source[best].final_checkpoint().unwrap();
    let mut rng = rng_for(&[seed, SHUFFLE_TAG]);
    let shuffled = cp
        .explanations
        .iter()
        .zip(&cp.used_memories)
        .map(|(e, pool)| shuffle_baseline(pool, e.len(), &mut rng).expect("shuffled control"))
        .collect();
    let computed: &'static McSource = Box::leak(Box::new(McSource {
        explanations: cp.explanations.clone(),
        shuffled,
        goal_trials: cp.test_reached_goal.iter().filter(|g| **g).count(),
    }));
    cache.lock().unwrap().insert(seed, computed);
    computed
}

fn summary<'a>(report: &'a ComparisonReport, name: &str) -> &'a GroupSummary {
    &report.group(name).unwrap_or_else(|| panic!("group {name} missing")).summary
}

/// AUC difference between two groups relative to the no-explanation AUC.
fn normalized_gap(a: f64, b: f64, none: f64) -> f64 {
    (a - b) / none.abs().max(f64::MIN_POSITIVE)
}

fn tally(hits: usize, needed: usize, detail: Vec<String>) -> Outcome {
    (hits >= needed, format!("{hits}/{} seeds (need {needed}); {}", SEEDS.len(), detail.join("; ")))
}

pub fn c01_selectivity() -> Outcome {
    let mut hits = 0;
    let mut detail = Vec::new();
    for seed in SEEDS {
        let (entries, length) = grid_seed(seed).selectivity;
        let ok = entries >= 1 && entries as f64 <= 0.25 * length as f64;
        hits += ok as usize;
        detail.push(format!("s{seed} {entries}/{length}"));
    }
    tally(hits, 4, detail)
}

pub fn c02_provision_speedup() -> Outcome {
    let mut hits = 0;
    let mut detail = Vec::new();
    for seed in SEEDS {
        let r = &grid_seed(seed).report;
        let (none, expl) = (summary(r, "none"), summary(r, "explanation"));
        let ratio = expl.mean_episodes_to_success / none.mean_episodes_to_success;
        let ok = ratio <= 0.6 && expl.auc > none.auc;
        hits += ok as usize;
        detail.push(format!("s{seed} ratio {ratio:.2} auc {:.0} vs {:.0}", expl.auc, none.auc));
    }
    tally(hits, 4, detail)
}

pub fn c03_checkpoint_age() -> Outcome {
    let mut hits = 0;
    let mut detail = Vec::new();
    for seed in SEEDS {
        let r = &grid_seed(seed).report;
        let (late, early) = (summary(r, "explanation"), summary(r, "explanation-200"));
        hits += (late.final_100_mean_reward >= early.final_100_mean_reward) as usize;
        detail.push(format!("s{seed} {:.3} vs {:.3}", late.final_100_mean_reward, early.final_100_mean_reward));
    }
    tally(hits, 3, detail)
}

pub fn c04_shuffled_ordering() -> Outcome {
    const MC_BUDGET_SECS: f64 = 30.0 * 60.0;
    let (mut grid_hits, mut mc_hits) = (0, 0);
    let mut detail = Vec::new();
    let mut slowest: f64 = 0.0;
    for seed in SEEDS {
        let r = &grid_seed(seed).report;
        let (none, expl, shuf) = (summary(r, "none"), summary(r, "explanation"), summary(r, "shuffled"));
        grid_hits += (expl.auc >= shuf.auc && shuf.auc >= none.auc) as usize;
        let grid_gap = normalized_gap(expl.auc, shuf.auc, none.auc);

        let source = mc_source(seed);
        let start = Instant::now();
        let groups = [
            GroupSpec::none("none"),
            GroupSpec::guided("explanation", source.explanations.clone()),
            GroupSpec::guided("shuffled", source.shuffled.clone()),
        ];
        let mc = run_group_comparison(&receivers(&mc_config(seed), 20, 300), &groups).expect("mountain car comparison");
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let (m_none, m_expl, m_shuf) = (summary(&mc, "none"), summary(&mc, "explanation"), summary(&mc, "shuffled"));
        let mc_gap = normalized_gap(m_expl.auc, m_shuf.auc, m_none.auc);
        mc_hits += (mc_gap > grid_gap) as usize;
        detail.push(format!(
            "s{seed} grid auc {:.0}/{:.0}/{:.0} gap {grid_gap:.3}, mc auc {:.0}/{:.0}/{:.0} gap {mc_gap:.3} (source goals {}/20)",
            expl.auc, shuf.auc, none.auc, m_expl.auc, m_shuf.auc, m_none.auc, source.goal_trials
        ));
    }
    let pass = grid_hits >= 3 && mc_hits >= 3 && slowest < MC_BUDGET_SECS;
    (
        pass,
        format!(
            "grid ordering {grid_hits}/5, mountain car gap {mc_hits}/5 (need 3 each), slowest mountain car comparison {slowest:.0}s; {}",
            detail.join("; ")
        ),
    )
}

pub fn c11_a2c_transfer() -> Outcome {
    let mut hits = 0;
    let mut detail = Vec::new();
    for seed in SEEDS {
        let source = mc_source(seed);
        let groups = [
            GroupSpec::none("a2c").with_variant(AgentVariant::A2cBaseline),
            GroupSpec::guided("a2c-explanation", source.explanations.clone()).with_variant(AgentVariant::A2cBaseline),
        ];
        let r = run_group_comparison(&receivers(&mc_config(seed), 20, 300), &groups).expect("a2c comparison");
        let (base, expl) = (summary(&r, "a2c"), summary(&r, "a2c-explanation"));
        hits += (expl.first_50_mean_reward >= base.first_50_mean_reward) as usize;
        detail.push(format!("s{seed} {:.2} vs {:.2}", expl.first_50_mean_reward, base.first_50_mean_reward));
    }
    tally(hits, 3, detail)
}
