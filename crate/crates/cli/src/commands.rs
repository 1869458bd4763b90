use std::fs;
use std::path::{Path, PathBuf};

use ctdl::agent::AgentCheckpoint;
use ctdl::env::GridAction;
use ctdl::explain::{generate_online, prune, shuffle_baseline};
use ctdl::harness::{
    self, ComparisonReport, ExperimentConfig, GroupKind, GroupReport, GroupSpec, RunRecord,
};
use ctdl::seed::rng_for;
use ctdl::{Agent, AgentVariant, EnvAction, EnvSpec, Error, Explanation, Provenance, Result};
use serde_json::{json, Map, Value};

use crate::{Cli, Command, CompareArgs, ConfigArgs, ExplainArgs, InspectArgs, Preset, ProvideArgs, RenderArgs, RenderFormat};

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => train(&args.config, None),
        Command::Provide(args) => provide(args),
        Command::Compare(args) => compare(args),
        Command::Explain(args) => explain(args),
        Command::Render(args) => render(args),
        Command::Inspect(args) => inspect(args),
    }
}

/// Turns `a.b.c=value` into `{"a":{"b":{"c":value}}}`.
fn parse_override(spec: &str) -> Result<Value> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form PATH=VALUE")))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override `{spec}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(path.rsplit('.').fold(value, |inner, key| {
        let mut m = Map::new();
        m.insert(key.to_string(), inner);
        Value::Object(m)
    }))
}

fn load_config(args: &ConfigArgs, extra: Value) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut overrides = json!({});
    for spec in &args.overrides {
        harness::merge(&mut overrides, &parse_override(spec)?);
    }
    let flags = [
        ("master_seed", args.seed.map(Value::from)),
        ("population", args.population.map(Value::from)),
        ("episodes", args.episodes.map(Value::from)),
        ("checkpoint_every", args.checkpoint_every.map(Value::from)),
        ("threshold", args.threshold.map(Value::from)),
        (
            "preset",
            args.preset.map(|p| {
                Value::from(match p {
                    Preset::DeskScale => "desk-scale",
                    Preset::PaperScale => "paper-scale",
                })
            }),
        ),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            overrides[key] = v;
        }
    }
    harness::merge(&mut overrides, &extra);
    ExperimentConfig::from_json_with_overrides(&text, &overrides)
}

fn create_run_dir(root: &Path, cfg: &ExperimentConfig) -> Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
    let dir = root.join(cfg.run_dir_name(&stamp));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.json"), cfg.to_json())?;
    Ok(dir)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    fs::write(path, text)?;
    Ok(())
}

fn run_population(cfg: &ExperimentConfig, group: &GroupSpec, dir: &Path) -> Result<Vec<RunRecord>> {
    let runs = harness::train_group(cfg, group);
    let agents_dir = dir.join("agents");
    let expl_dir = dir.join("explanations");
    fs::create_dir_all(&agents_dir)?;
    fs::create_dir_all(&expl_dir)?;
    for run in &runs {
        let id = run.record.agent_id;
        if let Some(agent) = &run.agent {
            agent.to_checkpoint().write(&agents_dir.join(format!("agent{id}.json")))?;
        }
        for cp in &run.record.checkpoints {
            for (k, expl) in cp.explanations.iter().enumerate() {
                expl.write(&expl_dir.join(format!("agent{id}-ep{}-test{k}.json", cp.episode)))?;
            }
        }
        if let Some(reason) = &run.record.failed {
            eprintln!("warning: agent {id} failed: {reason}");
        }
    }
    let records: Vec<RunRecord> = runs.into_iter().map(|r| r.record).collect();
    let records_json = serde_json::to_value(&records).map_err(|e| Error::Numerical(e.to_string()))?;
    write_json(&dir.join("records.json"), &records_json)?;
    let report = ComparisonReport {
        smoothing_window: cfg.smoothing_window,
        groups: vec![GroupReport::build(&group.name, records.clone(), cfg)],
    };
    harness::write_report(&report, dir)?;
    let best = harness::select_best(&records)
        .map_err(|_| Error::Numerical("every agent in the population failed".into()))?;
    let best_record = &records[best];
    let files: Vec<String> = best_record
        .final_checkpoint()
        .map(|cp| (0..cp.explanations.len()).map(|k| format!("explanations/agent{best}-ep{}-test{k}.json", cp.episode)).collect())
        .unwrap_or_default();
    write_json(
        &dir.join("best.json"),
        &json!({
            "best_agent": best,
            "final_test_reward": best_record.final_test_reward,
            "total_training_reward": best_record.total_training_reward,
            "final_explanations": files,
        }),
    )?;
    Ok(records)
}

fn train(args: &ConfigArgs, extra: Option<Value>) -> Result<()> {
    let cfg = load_config(args, extra.unwrap_or_else(|| json!({})))?;
    let group = GroupSpec::from_config(&cfg)?;
    let dir = create_run_dir(&args.out, &cfg)?;
    let records = run_population(&cfg, &group, &dir)?;
    eprintln!("trained {} agents into {}", records.len(), dir.display());
    Ok(())
}

fn provide(args: ProvideArgs) -> Result<()> {
    let kind = if args.shuffled { GroupKind::Shuffled } else { GroupKind::Explanation };
    let extra = json!({ "group": kind, "explanations": args.explanations });
    train(&args.config, Some(extra))
}

fn compare(args: CompareArgs) -> Result<()> {
    let cfg = load_config(&args.config, json!({}))?;
    let read_all = |paths: &[PathBuf]| paths.iter().map(|p| Explanation::read(p)).collect::<Result<Vec<_>>>();
    let mut groups = vec![GroupSpec::none("none")];
    if !args.explanations.is_empty() {
        groups.push(GroupSpec::guided("explanation", read_all(&args.explanations)?));
    }
    if !args.shuffled.is_empty() {
        groups.push(GroupSpec::guided("shuffled", read_all(&args.shuffled)?));
    }
    if args.a2c {
        groups = groups.into_iter().map(|g| g.with_variant(AgentVariant::A2cBaseline)).collect();
    }
    let dir = create_run_dir(&args.config.out, &cfg)?;
    let report = harness::run_group_comparison(&cfg, &groups)?;
    harness::write_report(&report, &dir)?;
    for g in &report.groups {
        eprintln!(
            "{:<12} auc {:>12.3}  episodes-to-success {:>8.1}  final-100 mean {:>10.3}",
            g.name, g.summary.auc, g.summary.mean_episodes_to_success, g.summary.final_100_mean_reward
        );
    }
    eprintln!("report written to {}", dir.display());
    Ok(())
}

fn explain(args: ExplainArgs) -> Result<()> {
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        return Err(Error::Validation(format!("threshold must lie in (0, 1), got {}", args.threshold)));
    }
    let agent = Agent::from_checkpoint(AgentCheckpoint::read(&args.agent)?)?;
    let spec = agent.env_spec().clone();
    let provenance = Provenance { environment: spec.id().to_string(), ..Provenance::default() };
    let mut env = spec.build()?;
    let expl = if args.online {
        generate_online(&agent, &mut env, args.threshold, args.stochastic, &mut rng_for(&[args.seed]))?
    } else {
        let trace = agent.run_test_trial(&mut env, args.stochastic, &mut rng_for(&[args.seed]))?;
        prune(&trace.rows(), args.threshold)
    }
    .with_provenance(provenance.clone());
    expl.write(&args.out)?;
    eprintln!("{} entries written to {}", expl.len(), args.out.display());
    if args.shuffled {
        // the same seed replays the same trial
        let trace = agent.run_test_trial(&mut spec.build()?, args.stochastic, &mut rng_for(&[args.seed]))?;
        let control = shuffle_baseline(&trace.rows(), expl.len(), &mut rng_for(&[args.seed, 1]))?
            .with_provenance(Provenance { shuffled: true, ..provenance });
        let path = args.out.with_extension("shuffled.json");
        control.write(&path)?;
        eprintln!("shuffled control written to {}", path.display());
    }
    Ok(())
}

fn render(args: RenderArgs) -> Result<()> {
    let expl = Explanation::read(&args.explanation)?;
    let cfg = ExperimentConfig::load(&args.config)?;
    let agent = match &args.agent {
        Some(path) => Some(Agent::from_checkpoint(AgentCheckpoint::read(path)?)?),
        None => None,
    };
    let trajectory = match &agent {
        Some(a) => {
            let mut env = cfg.environment.build()?;
            Some(a.run_test_trial(&mut env, false, &mut rng_for(&[args.seed]))?.trajectory())
        }
        None => None,
    };
    let text = match (&cfg.environment, args.format) {
        (EnvSpec::GridWorld(g), RenderFormat::Svg) => harness::render_gridworld_svg(g, &expl, trajectory.as_deref())?,
        (EnvSpec::GridWorld(g), RenderFormat::Ascii) => {
            harness::render_gridworld_ascii(g, &expl, trajectory.as_deref())?
        }
        (EnvSpec::MountainCar(_), RenderFormat::Csv) => {
            harness::export_mc_plot_data(trajectory.as_deref().unwrap_or(&[]), &expl)
        }
        (env, format) => {
            return Err(Error::Config(format!("format {format:?} is not available for {}", env.id())));
        }
    };
    fs::write(&args.out, text)?;
    Ok(())
}

fn action_label(action: &EnvAction, environment: &str) -> String {
    match action {
        EnvAction::Discrete(i) if environment == "grid_world" => {
            GridAction::from_index(*i).map_or_else(|_| i.to_string(), |a| format!("{i} {}", a.name()))
        }
        EnvAction::Discrete(i) => i.to_string(),
        EnvAction::Continuous(v) => v.iter().map(|x| format!("{x:+.3}")).collect::<Vec<_>>().join(","),
    }
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn inspect(args: InspectArgs) -> Result<()> {
    let expl = Explanation::read(&args.file)?;
    let p = &expl.provenance;
    println!(
        "# environment {} | agent {} | episode {} | test {} | shuffled {} | threshold {:.3}",
        if p.environment.is_empty() { "-" } else { &p.environment },
        opt(p.agent_id),
        opt(p.episode),
        opt(p.test_episode),
        if p.shuffled { "yes" } else { "no" },
        expl.threshold
    );
    println!("{:>6}  {:<28}  {:<12}  {:>10}  {:>6}", "t", "state", "action", "value", "beta");
    for e in &expl.entries {
        let state = format!("({})", e.state_raw.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", "));
        println!(
            "{:>6}  {:<28}  {:<12}  {:>10.4}  {:>6.3}",
            e.t,
            state,
            action_label(&e.action, &p.environment),
            e.value,
            e.beta
        );
    }
    if expl.is_empty() {
        println!("0 entries");
    }
    Ok(())
}
