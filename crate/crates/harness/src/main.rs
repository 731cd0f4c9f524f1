use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rendezvous_core::Error;
use rendezvous_harness::commands;
use rendezvous_harness::config::{
    AblateConfig, AblateKind, CollectConfig, EvalConfig, RawConfig, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "rendezvous",
    about = "Experiment harness for decentralized multiagent rendezvous"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Roll out scripted episodes and write prediction datasets.
    Collect {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the self- and other-motion predictors on collected datasets.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one planner across seeds and write traces plus summaries.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep one knob of the planner and write a summary per setting.
    Ablate {
        /// One of: planning_frequency, planning_horizon, prediction_type,
        /// cem_params.
        kind: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render distance-over-time curves from evaluation summaries.
    Plot {
        /// summary.csv files, one curve each.
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        /// Output SVG path (or a directory, which receives distance.svg).
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_raw(path: &PathBuf) -> Result<RawConfig, Error> {
    RawConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Error::InvalidConfig(format!("{}: {io}", path.display())),
        other => other,
    })
}

fn dispatch(cmd: Cmd) -> Result<(), Error> {
    match cmd {
        Cmd::Collect { config, seed, out } => {
            let cfg = CollectConfig::from_raw(&load_raw(&config)?, seed)?;
            commands::cmd_collect(&cfg, &out)
        }
        Cmd::Train { config, seed, out } => {
            let cfg = TrainConfig::from_raw(&load_raw(&config)?, seed)?;
            commands::cmd_train(&cfg, &out).map(|_| ())
        }
        Cmd::Evaluate { config, seed, out } => {
            let cfg = EvalConfig::from_raw(&load_raw(&config)?, seed)?;
            commands::cmd_evaluate(&cfg, &out).map(|_| ())
        }
        Cmd::Ablate {
            kind,
            config,
            seed,
            out,
        } => {
            let kind: AblateKind = kind.parse()?;
            let cfg = AblateConfig::from_raw(&load_raw(&config)?, kind, seed)?;
            commands::cmd_ablate(&cfg, &out)
        }
        Cmd::Plot { summaries, out } => commands::cmd_plot(&summaries, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
