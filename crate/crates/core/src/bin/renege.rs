use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use renege::scenario::{run_scenario, Experiment, RunError, ScenarioConfig};

/// Stationary workloads and loss probabilities for queues with impatient customers.
#[derive(Parser)]
#[command(name = "renege", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for summary.json, detail.csv and customers.csv.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Replaces the seed of the configured source.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Stationary begin-of-service workload draws.
    SampleW,
    /// Stationary end-of-service workload draws.
    SampleS,
    /// Loss probability with the begin-of-service deadline.
    LossBegin,
    /// Loss probability with the end-of-service deadline.
    LossEnd,
    /// Empty-epoch frequencies of a simulated path.
    Regen,
    /// Multi-server discrete event simulation.
    Des,
    /// Occupation measure, invariance distance and tightness.
    Cesaro,
    /// Single-server simulation against the workload recursion.
    Xval,
    /// Pointwise inequalities and path inclusions.
    Props,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::SampleW => Experiment::SampleW,
            Command::SampleS => Experiment::SampleS,
            Command::LossBegin => Experiment::LossBegin,
            Command::LossEnd => Experiment::LossEnd,
            Command::Regen => Experiment::Regenerativity,
            Command::Des => Experiment::Des,
            Command::Cesaro => Experiment::Cesaro,
            Command::Xval => Experiment::CrossValidate,
            Command::Props => Experiment::PropertySuite,
        }
    }
}

fn run(cli: &Cli) -> Result<PathBuf, RunError> {
    let path = cli.config.as_ref().ok_or_else(|| RunError::Config("--config is required".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed_override {
        cfg.source.set_seed(seed);
    }
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(RunError::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::Config(e.to_string()))?;
    }
    let out = cli
        .out_dir
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    run_scenario(cli.command.experiment(), &cfg, &out)?;
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            println!("{}", out.join("summary.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("renege: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
