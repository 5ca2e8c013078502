use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wplab_cli::commands::{error_kind, exit_code, run, validate_and_print};
use wplab_cli::config::{load, resolve};

#[derive(Parser)]
#[command(name = "wplab", version, about = "Wave-packet convergence studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Artifact directory (overrides the config).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Ladder points run concurrently (overrides the config).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Reserved; the pipelines are deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment and write its artifacts.
    Run { config: PathBuf },
    /// Check the configuration and estimate the cost without running.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let path = match &cli.command {
        Command::Run { config } | Command::Validate { config } => config,
    };
    let plan = load(path).and_then(|mut cfg| {
        if cli.seed.is_some() {
            cfg.experiment.seed = cli.seed;
        }
        resolve(&cfg, cli.output.as_deref(), cli.workers)
    });
    let mut stdout = std::io::stdout();
    let code = match plan {
        Err(e) => {
            println!("FAIL {}: {e}", error_kind(&e));
            exit_code(&e)
        }
        Ok(plan) => match cli.command {
            Command::Run { .. } => run(&plan, &mut stdout),
            Command::Validate { .. } => validate_and_print(&plan, &mut stdout),
        },
    };
    ExitCode::from(code as u8)
}
