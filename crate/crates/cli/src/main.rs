//! `nidid`: difference-in-differences fits, trend-model comparisons framed as
//! non-inferiority tests, power calculations and simulation studies.

mod commands;
mod ingest;
mod report;
mod simconfig;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{CompareArgs, FitArgs, NiCurveArgs, PowerArgs, SimulateArgs};

#[derive(Debug, Parser)]
#[command(name = "nidid", version, about)]
struct Cli {
    /// Worker threads for resampling and simulation (default: logical cores)
    #[arg(long, env = "NIDID_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one DID model and print per-period and average effects
    Fit(FitArgs),
    /// Compare the average effect of two trend models, with a verdict when --delta is given
    Compare(CompareArgs),
    /// Non-inferiority p-values over a grid of thresholds
    NiCurve(NiCurveArgs),
    /// Power, minimum detectable effect and related calculators
    Power(PowerArgs),
    /// Run simulation scenarios from a configuration file
    Simulate(SimulateArgs),
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(report::UsageError("thread count must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow::anyhow!("cannot configure worker threads: {e}"))?;
    }
    match &cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Compare(a) => commands::compare(a),
        Command::NiCurve(a) => commands::ni_curve_cmd(a),
        Command::Power(a) => commands::power_cmd(a),
        Command::Simulate(a) => commands::simulate(a, cli.threads),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(report::exit_code(&err) as u8)
        }
    }
}
