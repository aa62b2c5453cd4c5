use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csh_cli::{parse_config, run, CliError, Command, ExitKind, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "csh", version, about = "Doubly periodic Chern-Simons-Higgs vortex solver")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Progress on stderr.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Certify the Cartan data of catalogued simple types.
    Catalog,
    /// Certify the configured algebra or explicit matrix.
    CheckCartan,
    /// Resolve the integral constraints for given coefficients.
    Constraints,
    /// Minimize at one coupling and write a solution report.
    Solve,
    /// Solve over a list of couplings and write a CSV.
    Sweep,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Catalog => Command::Catalog,
            Cmd::CheckCartan => Command::CheckCartan,
            Cmd::Constraints => Command::Constraints,
            Cmd::Solve => Command::Solve,
            Cmd::Sweep => Command::Sweep,
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::new(ExitKind::Parse, format!("{}: {e}", path.display())))?,
        None if matches!(cli.command, Cmd::Catalog) => String::new(),
        None => return Err(CliError::new(ExitKind::Parse, "--config is required")),
    };
    Ok(parse_config(&text)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        out_dir: cli.out.clone(),
        verbose: cli.verbose,
    };
    let result = load(&cli).and_then(|cfg| run(cli.command.into(), &cfg, &opts, &mut std::io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.kind.code() as u8)
        }
    }
}
