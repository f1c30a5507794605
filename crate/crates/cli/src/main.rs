//! `ctxfuse` command-line tool.
//!
//! Exit status: 0 on success, 2 on invalid input (config, dataset, split or
//! arguments), 1 on any other failure.

mod commands;
mod manifest;
mod simfile;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Overrides, SplitArgs};
use ctxfuse::FusionError;

#[derive(Parser)]
#[command(name = "ctxfuse", version, about = "Context-aware fusion of multi-label expert reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic JSONL dataset.
    Simulate {
        /// Simulation config (flat TOML); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Replay a dataset: metrics, trajectory and final reputation.
    Replay {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Replay the full system and the four ablations on the same split.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit the decision threshold on the training split.
    TuneThreshold {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Repeat a recorded run from its manifest and check the outputs match.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Game config (flat TOML); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSONL round stream.
    #[arg(long)]
    dataset: PathBuf,
    /// Fraction of rounds, from the start, used for training [default: 0.7].
    #[arg(long, conflicts_with = "split_file")]
    train_frac: Option<f64>,
    /// File listing training round ids, one per line.
    #[arg(long)]
    split_file: Option<PathBuf>,
    /// Evaluation rounds do not update reputation, bank or correlations.
    #[arg(long)]
    no_update_eval: bool,
    #[arg(long)]
    freeze_reputation: bool,
    #[arg(long)]
    naive_credit: bool,
    #[arg(long)]
    no_guardrail: bool,
    #[arg(long)]
    context_agnostic: bool,
}

impl RunArgs {
    fn load(&self, command: &str) -> anyhow::Result<commands::Inputs> {
        let overrides = Overrides {
            no_update_eval: self.no_update_eval,
            freeze_reputation: self.freeze_reputation,
            naive_credit: self.naive_credit,
            no_guardrail: self.no_guardrail,
            context_agnostic: self.context_agnostic,
        };
        let split = SplitArgs {
            train_frac: self.train_frac,
            split_file: self.split_file.clone(),
        };
        commands::load_inputs(command, self.config.as_deref(), &self.dataset, &split, overrides)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { config, out_dir, seed } => commands::simulate(config.as_deref(), &out_dir, seed),
        Command::Replay { run, out_dir } => commands::run_replay(run.load("replay")?, &out_dir),
        Command::Ablate { run, out_dir } => commands::run_ablate(run.load("ablate")?, &out_dir),
        Command::TuneThreshold { run, out_dir } => {
            commands::run_tune_threshold(run.load("tune-threshold")?, out_dir.as_deref())
        }
        Command::Rerun { manifest, out_dir } => commands::rerun(&manifest, &out_dir),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|cause| cause.downcast_ref::<FusionError>())
        .map_or(1, |e| if e.is_validation() { 2 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
