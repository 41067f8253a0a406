use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infdist::pipeline::{ExperimentConfig, ResultStore, Stage};
use infdist::Error;

#[derive(Parser)]
#[command(name = "infdist", about = "Surface code memory experiments and infinite-distance extrapolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON). Optional when the run directory already holds a snapshot.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Override the worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// With `run`, stop after this stage.
    #[arg(long, global = true)]
    stage: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    Build,
    Sample,
    Dem,
    Decode,
    Estimate,
    Fit,
    Report,
    /// Every stage in order.
    Run,
}

fn open(cli: &Cli) -> infdist::Result<ResultStore> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ResultStore::open(&cli.out)?.config,
    };
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    config.validate()?;
    ResultStore::create(&cli.out, config)
}

fn execute(cli: &Cli) -> infdist::Result<()> {
    let store = open(cli)?;
    let single = |s| store.run_stage(s);
    match cli.command {
        Command::Build => single(Stage::Build),
        Command::Sample => single(Stage::Sample),
        Command::Dem => single(Stage::Dem),
        Command::Decode => single(Stage::Decode),
        Command::Estimate => single(Stage::Estimate),
        Command::Fit => single(Stage::Fit),
        Command::Report => single(Stage::Report),
        Command::Run => {
            let last = cli.stage.as_deref().map(str::parse).transpose()?.unwrap_or(Stage::Report);
            store.run_through(last)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
