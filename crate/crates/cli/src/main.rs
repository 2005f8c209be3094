//! `dys` command-line tool: synthesize data, train, predict, evaluate,
//! select features and export interpretation reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{RunConfig, Stages};
use dys::{DysError, HeadMode};

/// Invalid configuration, schema or parameter. Exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Parser)]
#[command(name = "dys", version, about = "Sparse, interpretable discrete-time survival models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the two-group synthetic dataset.
    Synth(Common),
    /// Fit a model on the training split and report test AUC.
    Train(Common),
    /// Write survival curves (or Cox risks) for each row of a CSV.
    Predict(Common),
    /// Time-dependent AUC on the test split the model was trained with.
    Eval(Common),
    /// Exact-k feature selection, optionally followed by interactions.
    Select(Common),
    /// Export importances and impact curves.
    Explain(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Rps,
    Cox,
}

#[derive(Args, Default)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of grid times.
    #[arg(long = "times")]
    n_times: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    stages: Option<Stages>,
    /// Number of active features to select.
    #[arg(long)]
    k: Option<usize>,
    /// Independent seeds (seed, seed + 1, ...) for `train`.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    parallel_trials: bool,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
    /// Synthetic sample size.
    #[arg(long)]
    n: Option<usize>,
}

impl Common {
    /// Config file values overridden by flags. `seed_given` reports whether
    /// `--seed` was passed.
    fn resolve(&self) -> anyhow::Result<(RunConfig, bool)> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let seed_given = self.seed.is_some();
        macro_rules! set {
            ($flag:expr, $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        set!(self.data.clone().map(Some), cfg.data);
        set!(self.model.clone().map(Some), cfg.model);
        set!(self.out, cfg.out);
        set!(self.seed, cfg.seed);
        set!(self.n_times, cfg.n_times);
        set!(self.stages.map(Some), cfg.stages);
        set!(self.k, cfg.selection.k);
        set!(self.trials, cfg.trials);
        set!(self.n, cfg.synth.n);
        if let Some(m) = self.mode {
            cfg.mode = match m {
                Mode::Rps => HeadMode::Rps,
                Mode::Cox => HeadMode::Cox,
            };
        }
        cfg.parallel_trials |= self.parallel_trials;
        cfg.explain.svg |= self.svg;
        let cfg = cfg.resolve();
        cfg.validate()?;
        Ok((cfg, seed_given))
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(c) => commands::synth(&c.resolve()?.0),
        Command::Train(c) => commands::train(&c.resolve()?.0),
        Command::Predict(c) => commands::predict(&c.resolve()?.0),
        Command::Eval(c) => {
            let (cfg, seed_given) = c.resolve()?;
            commands::eval(cfg, seed_given)
        }
        Command::Select(c) => commands::select(&c.resolve()?.0),
        Command::Explain(c) => {
            let (cfg, seed_given) = c.resolve()?;
            commands::explain(cfg, seed_given)
        }
    }
}

fn is_config_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<ConfigError>()
            || matches!(
                e.downcast_ref::<DysError>(),
                Some(DysError::Schema(_) | DysError::Parameter { .. } | DysError::HeadMode { .. })
            )
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DYS_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_config_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
