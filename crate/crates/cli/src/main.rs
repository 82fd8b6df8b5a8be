use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zoneflex_cli::{cmd_disaggregate, cmd_fit, cmd_pipeline, cmd_report, cmd_simulate, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "zoneflex", version, about = "Zone-level HVAC load disaggregation and flexibility metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set simulate.days=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known parameters.
    Simulate(Common),
    /// Fit fresh-air, building and fan models.
    Fit(Common),
    /// Split building loads into zone-level electrical loads.
    Disaggregate(Common),
    /// Compute flexibility metrics, thermal impact and plots.
    Report(Common),
    /// Run simulate, fit, disaggregate and report in sequence.
    Pipeline(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&RunConfig, &mut dyn Write) -> Result<(), CliError>) = match &cli.command {
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Fit(c) => (c, cmd_fit),
        Command::Disaggregate(c) => (c, cmd_disaggregate),
        Command::Report(c) => (c, cmd_report),
        Command::Pipeline(c) => (c, cmd_pipeline),
    };
    let result = RunConfig::load(common.config.as_deref(), &common.set)
        .map_err(CliError::from)
        .and_then(|cfg| run(&cfg, &mut io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
