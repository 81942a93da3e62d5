mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "rfem", version, about = "Recovered finite elements on polygonal meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a mesh and write it to the output directory.
    Mesh(Common),
    /// Solve once and report errors (when an exact solution is known).
    Solve(Common),
    /// Run a refinement study and write the convergence table.
    Study(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a config field by dotted path, e.g. `mesh.n_cells=1024`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RFEM_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("RFEM_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("RFEM_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let (common, cmd): (&Common, fn(&RunConfig, &std::path::Path) -> Result<(), CliError>) = match &cli.command {
        Command::Mesh(c) => (c, commands::mesh),
        Command::Solve(c) => (c, commands::solve),
        Command::Study(c) => (c, commands::study),
    };
    let cfg = RunConfig::load(&common.config, &common.set).map_err(|e| CliError::Config(e.0))?;
    cmd(&cfg, &common.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
