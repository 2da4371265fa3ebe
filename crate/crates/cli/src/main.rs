//! Experiment runner for the multi-cell power control simulator.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fedpower_core::config::{parse_mode, AlgorithmChoice, ExperimentConfig};
use fedpower_core::experiment::{
    compare_modes, run_experiment, write_comparison, write_experiment,
};
use fedpower_core::Error;

#[derive(Parser)]
#[command(
    name = "fedpower",
    version,
    about = "Multi-cell downlink power control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOverrides {
    /// Experiment configuration file (flat `key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a learner and evaluate it.
    Train {
        #[command(flatten)]
        common: CommonOverrides,
        /// Learning algorithm: dqn | pg.
        #[arg(long)]
        algo: Option<String>,
        /// Training mode: federated | distributed | centralized.
        #[arg(long)]
        mode: Option<String>,
        /// Episodes between aggregation rounds (federated).
        #[arg(long = "agg-period")]
        agg_period: Option<usize>,
    },
    /// Run all training modes side by side with identical seeds.
    Compare {
        #[command(flatten)]
        common: CommonOverrides,
    },
    /// Evaluate a non-learning allocator: wmmse | maxpower.
    Baseline {
        #[command(flatten)]
        common: CommonOverrides,
        /// Allocator: wmmse | maxpower.
        #[arg(long)]
        algo: String,
    },
}

fn load_config(common: &CommonOverrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_file(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train {
            common,
            algo,
            mode,
            agg_period,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(algo) = algo {
                let parsed = AlgorithmChoice::parse(&algo)?;
                if !parsed.is_learned() {
                    return Err(Error::config("algo", "train expects dqn or pg"));
                }
                cfg.algorithm = parsed;
            }
            if let Some(mode) = mode {
                cfg.mode = parse_mode(&mode)?;
            }
            if let Some(period) = agg_period {
                cfg.agg_period = period;
            }
            cfg.validate()?;
            if !cfg.algorithm.is_learned() {
                return Err(Error::config("algorithm", "train expects dqn or pg"));
            }
            let output = run_experiment(&cfg)?;
            let written = write_experiment(&output, &cfg.out_dir)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            println!(
                "{}: eval mean {:.4} bit/s/Hz (std {:.4}), overhead {}",
                output.summary.algorithm,
                output.summary.mean_rate_per_user,
                output.summary.std_rate_per_user,
                output.summary.communication_overhead
            );
            Ok(())
        }
        Command::Compare { common } => {
            let cfg = load_config(&common)?;
            let cmp = compare_modes(&cfg)?;
            let path = write_comparison(&cmp, &cfg.out_dir)?;
            println!("wrote {}", path.display());
            for series in &cmp.series {
                println!(
                    "{}: final mean {:.4} bit/s/Hz, overhead {}",
                    series.label, series.final_mean_rate_per_user, series.communication_overhead
                );
            }
            Ok(())
        }
        Command::Baseline { common, algo } => {
            let mut cfg = load_config(&common)?;
            let parsed = AlgorithmChoice::parse(&algo)?;
            if parsed.is_learned() {
                return Err(Error::config("algo", "baseline expects wmmse or maxpower"));
            }
            cfg.algorithm = parsed;
            cfg.validate()?;
            let output = run_experiment(&cfg)?;
            let written = write_experiment(&output, &cfg.out_dir)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            println!(
                "{}: eval mean {:.4} bit/s/Hz (std {:.4})",
                output.summary.algorithm,
                output.summary.mean_rate_per_user,
                output.summary.std_rate_per_user
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
