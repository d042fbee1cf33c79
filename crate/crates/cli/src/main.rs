use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slmarl_core::assumptions::{failures, validate_config};
use slmarl_core::harness::{run_paired_experiment, run_sweep, summarize, write_outputs, Arm, Metric};
use slmarl_core::{Error, ExperimentConfig, PairedRunResult};

#[derive(Parser)]
#[command(name = "slmarl", about = "Social-learning multi-agent actor-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One paired run (estimated vs. true beliefs).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired runs over a grid of drift values and seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated drift values, e.g. 0.25,0.125
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Number of seeds, counted up from run.base_seed.
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the assumption checks for a configuration.
    CheckAssumptions {
        #[arg(long)]
        config: PathBuf,
    },
    Version,
}

/// Failure with its exit code.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(e.exit_code() as u8, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Version => {
            println!("slmarl {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
        Command::CheckAssumptions { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let checks = validate_config(&cfg)?;
            for c in &checks {
                println!("{c}");
            }
            require_valid(&cfg)
        }
        Command::Run { config, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            require_valid(&cfg)?;
            let exp = cfg.build()?;
            let run = run_paired_experiment(&exp, seed, 0)?;
            finish(&out, &cfg, &[run])
        }
        Command::Sweep {
            config,
            eps,
            seeds,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            if seeds == 0 {
                return Err(Failure(2, "--seeds must be positive".into()));
            }
            for &d in &eps {
                require_valid(&cfg.with_drift(d))?;
            }
            let runs = run_sweep(&cfg, &eps, &cfg.seeds(seeds))?;
            finish(&out, &cfg, &runs)
        }
    }
}

fn require_valid(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let failed = failures(&validate_config(cfg)?);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure(
            2,
            format!(
                "configuration (drift {}) fails: {}",
                cfg.env.drift,
                failed.join(", ")
            ),
        ))
    }
}

fn finish(out: &Path, cfg: &ExperimentConfig, runs: &[PairedRunResult]) -> Result<(), Failure> {
    if let Some(r) = runs
        .iter()
        .flat_map(|r| [&r.partial, &r.full])
        .find(|t| t.violations > 0)
    {
        return Err(Failure(
            3,
            r.first_violation.clone().unwrap_or_default(),
        ));
    }
    write_outputs(out, cfg, runs)?;
    for row in summarize(runs) {
        let shown = matches!(
            row.metric,
            Metric::CumReward | Metric::CriticGap | Metric::ActorGap | Metric::PErrorWindow
        );
        if shown && (row.arm == Arm::Partial || row.metric == Metric::CumReward) {
            println!(
                "eps {:<6} {:<7} {:<16} mean {:>12.6} (n = {})",
                row.drift,
                row.arm.as_str(),
                row.metric.as_str(),
                row.mean,
                row.n
            );
        }
    }
    println!("wrote {} run(s) to {}", runs.len(), out.display());
    Ok(())
}
