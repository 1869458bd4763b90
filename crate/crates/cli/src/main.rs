//! `ctdl` command-line tool.
//!
//! Exit codes: 0 on success, 1 when the invocation or its inputs are
//! invalid (checked before any training starts), 2 when a run fails.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ctdl", version, about = "CTDL agents and episodic-memory explanations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a population and checkpoint its explanations.
    Train(TrainArgs),
    /// Explain a trained agent with one test trial.
    Explain(ExplainArgs),
    /// Train a population that receives explanation files.
    Provide(ProvideArgs),
    /// Run seed-matched groups side by side and write comparison metrics.
    Compare(CompareArgs),
    /// Render an explanation as SVG, ASCII or plotting CSV.
    Render(RenderArgs),
    /// Print an explanation file as a table.
    Inspect(InspectArgs),
}

/// Flags shared by every command that builds an experiment config.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output root; a run directory is created inside it.
    #[arg(long, env = "CTDL_OUT_DIR", default_value = "runs")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// β threshold for checkpoint explanations.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Generic override, e.g. `--set agent.som.tau=0.002` (value parsed as
    /// JSON, falling back to a string). Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    DeskScale,
    PaperScale,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ProvideArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Explanation file(s); each agent picks one uniformly.
    #[arg(long = "explanation", required = true)]
    pub explanations: Vec<PathBuf>,
    /// Label the group as receiving shuffled explanations.
    #[arg(long)]
    pub shuffled: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Explanation file(s) for the explanation group.
    #[arg(long = "explanation")]
    pub explanations: Vec<PathBuf>,
    /// Explanation file(s) for the shuffled group.
    #[arg(long = "shuffled")]
    pub shuffled: Vec<PathBuf>,
    /// Run the agents as the plain actor-critic baseline.
    #[arg(long)]
    pub a2c: bool,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Agent checkpoint written by `train`.
    #[arg(long)]
    pub agent: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Prune while the trial runs instead of afterwards.
    #[arg(long)]
    pub online: bool,
    /// Sample actions during the trial instead of acting greedily.
    #[arg(long)]
    pub stochastic: bool,
    /// Also write a size-matched shuffled control next to the output.
    #[arg(long)]
    pub shuffled: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output explanation file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RenderFormat {
    Svg,
    Ascii,
    Csv,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub explanation: PathBuf,
    /// Config whose environment the explanation belongs to.
    #[arg(long)]
    pub config: PathBuf,
    /// Agent checkpoint whose test trial is overlaid.
    #[arg(long)]
    pub agent: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "svg")]
    pub format: RenderFormat,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub file: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
