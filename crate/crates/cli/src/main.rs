//! `easysched` command-line front end.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "easysched",
    version,
    about = "Energy-aware job-shop scheduling with factory and energy-provider agents"
)]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for generated files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Log more (repeat for debug output).
    #[arg(long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random instance.
    Gen(commands::GenArgs),
    /// Solve an instance with the particle swarm.
    Predict(commands::PredictArgs),
    /// Run a scenario on the simulated clock.
    Run(commands::RunArgs),
    /// Sweep the objective weight over several seeds.
    Bench(commands::BenchArgs),
    /// Run one agent, or the orchestrator, over TCP.
    Serve(commands::ServeArgs),
    /// Convert a schedule JSON file to Gantt CSV.
    Gantt(commands::GanttArgs),
}

/// Failures split by exit code: bad input is 2, anything else is 1.
#[derive(Debug)]
pub enum CliError {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

pub fn input_error(e: impl Into<anyhow::Error>) -> CliError {
    CliError::Input(e.into())
}

pub struct Globals {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let globals = Globals {
        seed: cli.seed,
        out_dir: cli.out_dir,
    };
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&globals, a),
        Command::Predict(a) => commands::predict(&globals, a),
        Command::Run(a) => commands::run(&globals, a),
        Command::Bench(a) => commands::bench(&globals, a),
        Command::Serve(a) => commands::serve(&globals, a),
        Command::Gantt(a) => commands::gantt(&globals, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
