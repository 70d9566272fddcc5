//! Command-line front end: `run` a suite, `sweep` a perception experiment,
//! `analyze` stored logs, and `report` plot-ready tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tripleloop::harness::config::Config;
use tripleloop::harness::report::emit_reports;
use tripleloop::harness::suite::run_suite;
use tripleloop::harness::sweeps::{run_fog_sweep, run_sun_sweep};
use tripleloop::harness::{analyze, HarnessError};

#[derive(Parser)]
#[command(
    name = "tripleloop",
    about = "Deterministic VIL/SIL/MIL driving-loop simulation testbed",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to the JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the suite base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output directory (overrides config and TRIPLELOOP_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Fog,
    Sun,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the configured experiment suite.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Execute one MIL perception sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Which sweep to run.
        #[arg(long, value_enum)]
        kind: SweepArg,
    },
    /// Compute metrics and correlation tables from stored logs.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Emit plot data and table files from stored logs.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common) -> Result<(Config, u64, PathBuf), HarnessError> {
    let config = Config::load(&common.config)?;
    let seed = common.seed.unwrap_or(config.suite.base_seed);
    let out = common
        .out
        .clone()
        .or_else(|| std::env::var_os("TRIPLELOOP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    Ok((config, seed, out))
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { common } => {
            let (config, seed, out) = resolve(&common)?;
            let summary = run_suite(&config, seed, common.jobs, &out)?;
            println!(
                "suite {}: {} runs -> {}",
                summary.name,
                summary.runs.len(),
                out.display()
            );
        }
        Command::Sweep { common, kind } => {
            let (config, seed, out) = resolve(&common)?;
            match kind {
                SweepArg::Fog => {
                    let result = run_fog_sweep(&config, seed, common.jobs, &out)?;
                    println!(
                        "fog sweep: {} points, flat DR {:.3}, collision threshold {}",
                        result.points.len(),
                        result.flat_mean_dr,
                        result
                            .collision_fog_threshold
                            .map(|f| format!("{f:.2}"))
                            .unwrap_or_else(|| "n/a (run `analyze` first)".into())
                    );
                }
                SweepArg::Sun => {
                    let result = run_sun_sweep(&config, seed, common.jobs, &out)?;
                    println!(
                        "sun sweep: {} cells, baseline DR {:.3}, range [{:.3}, {:.3}]",
                        result.points.len(),
                        result.baseline_dr,
                        result.min_dr,
                        result.max_dr
                    );
                }
            }
        }
        Command::Analyze { common } => {
            let (config, _, out) = resolve(&common)?;
            let output = analyze::analyze(&config, &out)?;
            println!(
                "analyzed {} runs; diagnosis/prediction tables written to {}",
                output.rows.len(),
                out.display()
            );
        }
        Command::Report { common } => {
            let (config, _, out) = resolve(&common)?;
            let output = emit_reports(&config, &out)?;
            for (name, rows) in [
                ("diagnosis", &output.tables.diagnosis),
                ("prediction", &output.tables.prediction),
            ] {
                for row in rows.iter() {
                    println!(
                        "{name}: {} {} -> {}: r = {:+.3}, p = {:.4}, n = {}",
                        row.driving.label(),
                        row.predictive,
                        row.response,
                        row.result.r,
                        row.result.p_value,
                        row.result.n
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
