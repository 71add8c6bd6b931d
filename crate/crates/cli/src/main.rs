//! `mgsta` command-line tool.
//!
//! Exit codes: 0 success, 1 error, 2 infeasible design, 3 verification failed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "mgsta", version, about = "Robust super-twisting design: synthesis, verification and simulation")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON configuration; the embedded trailer benchmark when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads for grid and vertex fan-out (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Override one configuration entry, e.g. `--set design.alpha=8`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the inner program at the configured (alpha, rho).
    Synth,
    /// Grid search plus refinement over (alpha, rho).
    Search,
    /// Check the analysis inequalities for a synthesis result.
    Analyze {
        /// `result.json` written by `synth` or `search`.
        #[arg(long)]
        result: PathBuf,
    },
    /// Simulate one vertex of the configured plant.
    Simulate {
        #[arg(long, default_value_t = 0)]
        vertex: usize,
        /// Take gains and certificates from a synthesis result.
        #[arg(long)]
        result: Option<PathBuf>,
    },
    /// Run the trailer benchmark on every (or one) vertex.
    Trailer {
        #[arg(long)]
        vertex: Option<usize>,
        /// Search for gains first instead of using the configured ones.
        #[arg(long)]
        synthesize: bool,
        /// Take gains from a synthesis result.
        #[arg(long, conflicts_with = "synthesize")]
        result: Option<PathBuf>,
        /// Skip the physical-coordinate re-simulation.
        #[arg(long)]
        no_physical: bool,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("MGSTA_LOG")
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.common.verbose);
    let run = || match &cli.command {
        Command::Synth => commands::synth(&cli.common),
        Command::Search => commands::search(&cli.common),
        Command::Analyze { result } => commands::analyze(&cli.common, result),
        Command::Simulate { vertex, result } => commands::simulate(&cli.common, *vertex, result.as_deref()),
        Command::Trailer { vertex, synthesize, result, no_physical } => {
            commands::trailer(&cli.common, *vertex, *synthesize, result.as_deref(), !*no_physical)
        }
    };
    let outcome = match cli.common.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(commands::Failure::Error(format!("thread pool: {e}"))),
        },
        None => run(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mgsta: {f}");
            ExitCode::from(f.code())
        }
    }
}
