use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use joinsafe_cli::{run_experiment, ExperimentConfig, Mode, Overrides};

#[derive(Parser)]
#[command(name = "joinsafe", version, about = "Join-avoidance simulations and star-schema experiments")]
struct Cli {
    #[command(subcommand)]
    mode: Command,
    /// Experiment configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo repetitions; overrides the config.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Monte Carlo sweep over a synthetic scenario.
    Simulate,
    /// Per-approach accuracy on a star-schema dataset.
    Experiment,
    /// Tuple-ratio verdict per dimension table.
    Advise,
    /// Compress a foreign-key domain.
    Compress,
    /// Map FK values unseen in training to seen ones.
    Smooth,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = match cli.mode {
        Command::Simulate => Mode::Simulate,
        Command::Experiment => Mode::Experiment,
        Command::Advise => Mode::Advise,
        Command::Compress => Mode::Compress,
        Command::Smooth => Mode::Smooth,
    };
    let overrides = Overrides {
        seed: cli.seed,
        runs: cli.runs,
        out: cli.out,
        jobs: cli.jobs,
    };
    let result = cli
        .config
        .ok_or_else(|| anyhow::anyhow!("--config is required"))
        .and_then(|path| ExperimentConfig::load(&path, mode, &overrides))
        .and_then(|cfg| run_experiment(&cfg, mode));
    match result {
        Ok(r) => {
            print!("{}", r.summary);
            for p in &r.written {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
