use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cermec::baselines::SCHEMES;
use cermec::cer::{gap_table, write_gap_csv, GapScenario};
use cermec::harness::{self, SweepSpec, SweepVar};
use cermec::mfba::SolverConfig;
use cermec::params::SystemParams;

#[derive(Parser)]
#[command(
    name = "cermec",
    version,
    about = "Max-min resource allocation for wireless-powered edge computing with energy recycling"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one seeded instance and print the allocation.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "MFBA")]
        scheme: String,
        /// Per-WS allocation table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo sweep over P_max, K or N.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated scheme names or `all`.
        #[arg(long, default_value = "all")]
        scheme: String,
        #[arg(long)]
        var: SweepVar,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare MFBA with the reference solvers on K = 2, N = 2 instances.
    Validate {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Capacity gain from energy recycling for a fixed scenario.
    Gap {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: &Option<PathBuf>) -> cermec::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> cermec::Result<()> {
    match cli.cmd {
        Cmd::Solve {
            config,
            seed,
            scheme,
            out,
        } => {
            let r =
                harness::run_single(config.as_deref(), seed, &scheme, &SolverConfig::default())?;
            print!("{}", harness::summary(&r));
            if let Some(p) = out {
                harness::write_report_csv(&r, File::create(p)?)?;
            }
        }
        Cmd::Sweep {
            config,
            seed,
            scheme,
            var,
            values,
            trials,
            out,
        } => {
            let schemes = if scheme.eq_ignore_ascii_case("all") {
                SCHEMES.iter().map(|s| s.to_string()).collect()
            } else {
                scheme.split(',').map(|s| s.trim().to_string()).collect()
            };
            let base = match config {
                Some(p) => SystemParams::load(p)?,
                None => SystemParams::default(),
            };
            let spec = SweepSpec {
                variable: var,
                values,
                trials,
                schemes,
                base,
                seed,
                solver: SolverConfig::default(),
            };
            let rows = harness::run_sweep_to(&spec, &out)?;
            let failed = rows
                .iter()
                .filter(|r| r.status.starts_with("error"))
                .count();
            eprintln!(
                "{} rows written to {} ({} failed), means in {}",
                rows.len(),
                out.display(),
                failed,
                harness::aggregate_path(&out).display()
            );
        }
        Cmd::Validate { count, seed, out } => {
            let rows = harness::run_validate(count, seed, &SolverConfig::default())?;
            harness::write_validate_csv(&rows, output(&out)?)?;
            let worst = rows
                .iter()
                .filter(|r| r.usable())
                .map(|r| r.delta_grid.abs().max(r.delta_projected.abs()))
                .fold(0.0, f64::max);
            eprintln!(
                "{} of {} instances usable, max relative delta {:.3e}",
                rows.iter().filter(|r| r.usable()).count(),
                rows.len(),
                worst
            );
        }
        Cmd::Gap { config, out } => {
            let s = GapScenario::load(config)?;
            write_gap_csv(&gap_table(&s)?, output(&out)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
