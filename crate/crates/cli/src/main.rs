use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use evi_plast_cli::config::OutputFormat;
use evi_plast_cli::{run, Command, RunOptions};

/// Dynamic elastoplasticity with kinematic hardening: forward solves,
/// regularization studies, gradient checks and optimal control.
#[derive(Debug, Parser)]
#[command(name = "evi-plast", version)]
struct Cli {
    /// forward | lambda_study | gradcheck | optimize | continuation
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for random gradient-check directions.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output format; overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Vtk,
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format.map(|f| match f {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Vtk => OutputFormat::Vtk,
        FormatArg::Both => OutputFormat::Both,
    });
    let opts = RunOptions { config: cli.config, out: cli.out, seed: cli.seed, format, verbose: cli.verbose };
    match run(cli.command, &opts) {
        Ok(report) => {
            for line in report.lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
