//! `hybridj`: synthesize data, score, partition, run hybrid-model
//! experiments and write reports. Exit code 1 is a validation error, 2 an
//! I/O error.

mod commands;
mod error;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybridj::dataset::DEFAULT_CHARGE_TOP_K;
use hybridj::scoring::{parse_pair, Scorer};

use commands::CharacterizeOptions;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hybridj", version, about = "Human and machine risk-score fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth {
        /// JSON synthesis config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Accuracy, FPR and FNR of every scorer at cutoffs 1..=10.
    Calibrate {
        #[arg(long)]
        data: PathBuf,
        /// Also write calibration.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eight-case partition of a scorer pair.
    Partition {
        #[arg(long)]
        data: PathBuf,
        /// Machine and human scorer, e.g. `C,HNR`.
        #[arg(long, default_value = "C,HNR", value_parser = pair_arg)]
        pair: (Scorer, Scorer),
        /// Also write partition.csv and summary.md here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated-split evaluation of a model grid plus every report file.
    Run {
        #[arg(long)]
        data: PathBuf,
        /// JSON experiment config.
        #[arg(long)]
        experiment: PathBuf,
        /// Output directory; falls back to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides base_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Eight-case tree, per-case clusters, difference trees, importances.
    Characterize {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "C,HNR", value_parser = pair_arg)]
        pair: (Scorer, Scorer),
        /// Also write the artifacts here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip mean-shift clustering.
        #[arg(long)]
        no_cluster: bool,
    },
    /// Rebuild summary.md from a results directory.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
}

fn pair_arg(s: &str) -> Result<(Scorer, Scorer), String> {
    parse_pair(s).map_err(|e| e.to_string())
}

fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Synth { config, out, seed } => commands::synth(config.as_deref(), &out, seed),
        Command::Calibrate { data, out } => commands::calibrate(&data, out.as_deref()),
        Command::Partition { data, pair, out } => commands::partition(&data, &pair, out.as_deref()),
        Command::Run {
            data,
            experiment,
            out,
            seed,
        } => commands::run(&data, &experiment, out.as_deref(), seed),
        Command::Characterize {
            data,
            pair,
            out,
            seed,
            no_cluster,
        } => commands::characterize(
            &data,
            &CharacterizeOptions {
                pair,
                seed,
                cluster: !no_cluster,
                charge_top_k: DEFAULT_CHARGE_TOP_K,
            },
            out.as_deref(),
        ),
        Command::Report { results } => commands::report(&results),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are successes; usage errors are
            // validation errors.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
