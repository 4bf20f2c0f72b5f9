//! `bcast`: single simulations, policy training, paired evaluation and
//! report emission.

mod commands;
mod io;
mod manifest;
mod plot;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bcast", version, about = "Block propagation experiments with a learned broadcast order")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML config; created with all defaults when missing.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed (overrides `experiment.seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeArg {
    Sample,
    Greedy,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation, with the shuffle baseline or a trained policy.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Policy mode (overrides `experiment.treated_mode`).
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Also write every block-phase message to events.csv.gz.
        #[arg(long)]
        event_log: bool,
    },
    /// Train the ordering policy with PPO.
    Train {
        #[command(flatten)]
        common: Common,
        /// Checkpoint path (overrides `rl.checkpoint_path`).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Total iterations (overrides `rl.iterations`).
        #[arg(long)]
        iterations: Option<usize>,
        /// Continue from the checkpoint when it exists.
        #[arg(long)]
        resume: bool,
    },
    /// Paired baseline/treated runs over many seeds.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, required_unless_present = "untrained")]
        checkpoint: Option<PathBuf>,
        /// Use a freshly initialized policy instead of a checkpoint.
        #[arg(long, conflicts_with = "checkpoint")]
        untrained: bool,
        /// Number of pairs (overrides `experiment.pairs`).
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// ECDF plots and carbon summary from an evaluation directory.
    Report {
        /// Directory written by `evaluate`.
        dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            common,
            checkpoint,
            mode,
            event_log,
        } => commands::simulate(&common, checkpoint.as_deref(), mode, event_log),
        Command::Train {
            common,
            checkpoint,
            iterations,
            resume,
        } => commands::train(&common, checkpoint.as_deref(), iterations, resume),
        Command::Evaluate {
            common,
            checkpoint,
            untrained,
            pairs,
            mode,
        } => commands::evaluate(&common, checkpoint.as_deref(), untrained, pairs, mode),
        Command::Report { dir, common } => commands::report(&dir, &common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
