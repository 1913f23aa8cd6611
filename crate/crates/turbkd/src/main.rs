use clap::{Parser, Subcommand as ClapSubcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use turbkd::cli::{runner, ScenarioConfig, Subcommand};
use turbkd::Error;

/// Finite-size decoy-state BB84 key rates over turbulent free-space
/// channels, with prefixed (P-RTS) and adaptive (ARTS) transmittance
/// post-selection.
///
/// Exit codes: 0 success, 2 config error, 3 infeasible scenario (no key),
/// 4 internal numerical failure.
#[derive(Parser)]
#[command(name = "turbkd", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario config file (sectioned key=value); defaults apply when
    /// omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config value, e.g. --set channel.loss_db=17 (repeatable;
    /// later overrides win).
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    sets: Vec<String>,

    /// Random seed (shorthand for --set simulation.seed=N).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV and plot artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Asymptotic rate curve R(eta) and the critical transmittance.
    RateCurve,
    /// Optimize the sender state for the assumed channel.
    Optimize,
    /// ARTS transmittance-cutoff scan of the finite-size rate.
    Scan,
    /// Prefixed-threshold (P-RTS) evaluation at a fixed or asymptotic cutoff.
    Prts,
    /// Monte Carlo session simulation with empirical key rates.
    Simulate,
    /// Optimal cutoff versus sent pulses, mean loss and sigma.
    ThresholdStudy,
    /// Mean-loss extension the selection method buys per detector quality.
    Improvement,
    /// Synthetic probe calibration round trip.
    Calibrate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let subcommand = match cli.command {
        Command::RateCurve => Subcommand::RateCurve,
        Command::Optimize => Subcommand::Optimize,
        Command::Scan => Subcommand::Scan,
        Command::Prts => Subcommand::Prts,
        Command::Simulate => Subcommand::Simulate,
        Command::ThresholdStudy => Subcommand::ThresholdStudy,
        Command::Improvement => Subcommand::Improvement,
        Command::Calibrate => Subcommand::Calibrate,
    };

    match execute(&cli, subcommand) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            if outcome.no_key {
                println!("no key under this scenario");
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(4)
        }
    }
}

fn execute(cli: &Cli, subcommand: Subcommand) -> turbkd::Result<runner::RunOutcome> {
    let mut config = match &cli.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    for (i, set) in cli.sets.iter().enumerate() {
        config.apply_override(set).map_err(|e| Error::Config {
            path: PathBuf::from("--set"),
            line: i + 1,
            message: e.to_string(),
        })?;
    }
    if let Some(seed) = cli.seed {
        config.simulation.seed = seed;
    }
    runner::run(subcommand, &config, &cli.out)
}
