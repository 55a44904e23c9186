mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vastate::data::OracleKind;
use vastate::model::Architecture;

use crate::error::CliError;

/// Train, evaluate and run small state-based audio effect models.
#[derive(Parser, Debug)]
#[command(name = "vastate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset from a reference effect.
    Dataset {
        #[arg(long, value_parser = parse_effect)]
        effect: OracleKind,
        /// Physical values, e.g. "drive=1,5,20;tone_hz=8000". Unlisted knobs sit mid-range.
        #[arg(long, conflicts_with = "levels")]
        grid: Option<String>,
        /// Evenly spaced values per knob on the normalized axis.
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds per combination.
        #[arg(long, default_value_t = vastate::data::RECORDING_SECONDS)]
        duration: f64,
        /// Optional 48 kHz mono WAV used for the instrument blocks.
        #[arg(long)]
        material: Option<PathBuf>,
        /// Allow writing into a non-empty directory.
        #[arg(long)]
        force: bool,
    },
    /// Train one architecture on one split composition.
    Train {
        #[arg(long, value_parser = parse_arch)]
        arch: Architecture,
        #[arg(long)]
        dataset: PathBuf,
        /// Composition index, 1 to 5.
        #[arg(long)]
        composition: usize,
        #[arg(long)]
        out: PathBuf,
        /// Key-value training config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. --set batch_size=8. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Stream a split through a checkpoint and report metrics.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        composition: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test", value_parser = ["test", "validation"])]
        split: String,
        /// Dataset label used in the CSV; defaults to the directory name.
        #[arg(long)]
        name: Option<String>,
        /// Also write each prediction as a WAV.
        #[arg(long)]
        save_predictions: bool,
    },
    /// Process a WAV file with a checkpoint.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Constant normalized parameters, comma separated.
        #[arg(long, conflicts_with = "schedule", allow_hyphen_values = true)]
        params: Option<String>,
        /// CSV with header sample_index,p1,...
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Measure streaming throughput and report cost figures.
    Benchmark {
        #[arg(long, required_unless_present = "arch")]
        checkpoint: Option<PathBuf>,
        /// Benchmark a freshly initialized model instead of a checkpoint.
        #[arg(long, value_parser = parse_arch, conflicts_with = "checkpoint")]
        arch: Option<Architecture>,
        #[arg(long, default_value_t = 2)]
        cond_dim: usize,
        #[arg(long)]
        out: PathBuf,
        /// Seconds of audio to process.
        #[arg(long, default_value_t = 5.0)]
        seconds: f64,
    },
    /// Significance tests over evaluation CSVs.
    Compare {
        /// Evaluation CSV paths or glob patterns.
        #[arg(required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_effect(s: &str) -> Result<OracleKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = OracleKind::ALL.iter().map(|k| k.name()).collect();
        format!(
            "unknown effect '{s}' (expected one of: {})",
            names.join(", ")
        )
    })
}

fn parse_arch(s: &str) -> Result<Architecture, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Architecture::ALL.iter().map(|a| a.name()).collect();
        format!(
            "unknown architecture '{s}' (expected one of: {})",
            names.join(", ")
        )
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Dataset {
            effect,
            grid,
            levels,
            out,
            seed,
            duration,
            material,
            force,
        } => commands::dataset(commands::DatasetArgs {
            effect,
            grid,
            levels,
            out,
            seed,
            duration,
            material,
            force,
        }),
        Command::Train {
            arch,
            dataset,
            composition,
            out,
            config,
            overrides,
            max_epochs,
            seed,
        } => commands::train(commands::TrainArgs {
            arch,
            dataset,
            composition,
            out,
            config,
            overrides,
            max_epochs,
            seed,
        }),
        Command::Eval {
            checkpoint,
            dataset,
            composition,
            out,
            split,
            name,
            save_predictions,
        } => commands::eval(commands::EvalArgs {
            checkpoint,
            dataset,
            composition,
            out,
            split,
            name,
            save_predictions,
        }),
        Command::Render {
            checkpoint,
            input,
            out,
            params,
            schedule,
        } => commands::render(
            &checkpoint,
            &input,
            &out,
            params.as_deref(),
            schedule.as_deref(),
        ),
        Command::Benchmark {
            checkpoint,
            arch,
            cond_dim,
            out,
            seconds,
        } => commands::benchmark(checkpoint.as_deref(), arch, cond_dim, &out, seconds),
        Command::Compare { inputs, out } => commands::compare(&inputs, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
