use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ganflow_cli::config::{self, ExperimentKind};
use ganflow_cli::error::AppError;

/// Particle-level WGAN training dynamics and their mean-field limit:
/// training runs, projected characteristic flows, coupling-rate sweeps,
/// integrator benchmarks and exact-transport self-tests.
#[derive(Parser)]
#[command(name = "ganflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run-config JSON document.
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config (default `runs/<experiment>`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for multi-run experiments. Defaults to the
    /// GANFLOW_THREADS environment variable, then to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the stochastic training loop on a particle ensemble.
    Train(CommonArgs),
    /// Integrate the mean-field flow of the parameter distributions.
    Meanfield(CommonArgs),
    /// Sweep particle counts and fit the coupling cost between both paths.
    Couple(CommonArgs),
    /// Integrate the closed-form two-mode example.
    Toy(CommonArgs),
    /// Fit the convergence rate of the projected Euler integrator.
    EulerRate(CommonArgs),
    /// Check the exact assignment solver against brute force and sorting.
    WassersteinSelftest(CommonArgs),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Train(_) => ExperimentKind::Train,
            Command::Meanfield(_) => ExperimentKind::Meanfield,
            Command::Couple(_) => ExperimentKind::Couple,
            Command::Toy(_) => ExperimentKind::Toy,
            Command::EulerRate(_) => ExperimentKind::EulerRate,
            Command::WassersteinSelftest(_) => ExperimentKind::WassersteinSelftest,
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Train(a)
            | Command::Meanfield(a)
            | Command::Couple(a)
            | Command::Toy(a)
            | Command::EulerRate(a)
            | Command::WassersteinSelftest(a) => a,
        }
    }
}

fn run(cli: &Cli) -> Result<(), AppError> {
    let kind = cli.command.kind();
    let args = cli.command.args();

    let mut config = config::load(&args.config)?;
    if config.experiment != kind {
        return Err(AppError::Config(format!(
            "experiment: config declares '{}' but the subcommand is '{}'",
            config.experiment.name(),
            kind.name()
        )));
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(kind.name()));
    let threads = match args.threads {
        Some(t) => t,
        None => std::env::var("GANFLOW_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0),
    };

    ganflow_cli::execute(&config, &out_dir, threads)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
