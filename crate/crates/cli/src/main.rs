//! `qmetro`: scenario runner for the topological metrology laboratory.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! failures, 1 when an output file cannot be written.

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use qmetro_core::experiments::scans::{chern_report_masses, chern_table};
use qmetro_core::experiments::{
    run_chern_report, run_holevo_scan, run_mass_sweep, run_optimize_povm, run_trajectory_scan,
    Overrides, Scenario, ScenarioConfig,
};
use qmetro_core::Error;

#[derive(Parser)]
#[command(name = "qmetro", version, about = "Topological bounds in two-parameter quantum metrology")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Uncertainty volumes and curvature bound along a trajectory.
    ScanTrajectory(Common),
    /// Optimized weighted bound against the Holevo and SLD bounds along a trajectory.
    ScanHolevo(Common),
    /// Quantum volume, Chern number and metrological potential over a mass grid.
    SweepMass(Common),
    /// Chern numbers and volume saturation ratios.
    ChernReport(Common),
    /// Optimize a three-element POVM at a single point.
    OptimizePovm(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Without it every value takes its default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

enum Failure {
    Core(Error),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn scenario(c: &Common) -> Result<Scenario, Error> {
    let overrides = Overrides { seed: c.seed, grid_n: c.grid_n, output: c.out.clone() };
    match &c.config {
        Some(path) => ScenarioConfig::from_path(path)?.resolve(&overrides, path.parent()),
        None => ScenarioConfig::default().resolve(&overrides, None),
    }
}

fn emit(path: Option<&Path>, content: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, content).map_err(|e| Failure::Io(p.to_path_buf(), e))?;
            info!("wrote {}", p.display());
            Ok(())
        }
        None => std::io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| Failure::Io(PathBuf::from("<stdout>"), e)),
    }
}

fn sibling(path: Option<&Path>, suffix: &str) -> Option<PathBuf> {
    path.map(|p| p.with_extension(suffix))
}

fn run(command: &Command, c: &Common) -> Result<(), Failure> {
    let s = scenario(c)?;
    let out = s.output.as_deref();
    match command {
        Command::ScanTrajectory(_) => {
            let scan = run_trajectory_scan(&s)?;
            let failed = scan.rows.iter().filter(|r| !r.errors.is_empty()).count();
            if failed > 0 {
                warn!("{failed} of {} points reported errors", scan.rows.len());
            }
            emit(out, &scan.to_table().to_csv())
        }
        Command::ScanHolevo(_) => {
            let scan = run_holevo_scan(&s)?;
            emit(out, &scan.to_table(s.measurement.shots).to_csv())
        }
        Command::SweepMass(_) => {
            let sweep = run_mass_sweep(&s)?;
            emit(out, &sweep.to_table().to_csv())?;
            match sibling(out, "spot.csv") {
                Some(p) => emit(Some(&p), &sweep.spot_table().to_csv())?,
                None => info!("spot checks:\n{}", sweep.spot_table().to_csv()),
            }
            if let Some(r) = sweep.rows.iter().find(|r| r.bound_holds() == Some(false)) {
                return Err(Error::InvalidArgument(format!(
                    "metrological potential exceeds 4 vol_g at M = {}",
                    r.mass
                ))
                .into());
            }
            Ok(())
        }
        Command::ChernReport(_) => {
            let rows = run_chern_report(&chern_report_masses(&s)?, s.grid_n);
            emit(out, &chern_table(&rows).to_csv())
        }
        Command::OptimizePovm(_) => {
            let summary = run_optimize_povm(&s)?;
            info!(
                "objective {:.12e} (reference {:.12e}), converged: {}",
                summary.objective, summary.reference, summary.converged
            );
            let mut povm = summary.povm.to_json();
            povm.push('\n');
            emit(out, &povm)?;
            if let Some(p) = sibling(out, "summary.json") {
                emit(Some(&p), &(summary.to_json() + "\n"))?;
            }
            if c.verbose {
                let trace = summary.trace_table().to_csv();
                match sibling(out, "trace.csv") {
                    Some(p) => emit(Some(&p), &trace)?,
                    None => eprint!("{trace}"),
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::ScanTrajectory(c)
        | Command::ScanHolevo(c)
        | Command::SweepMass(c)
        | Command::ChernReport(c)
        | Command::OptimizePovm(c) => c,
    };
    env_logger::Builder::new()
        .filter_level(if common.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn })
        .format_timestamp(None)
        .init();
    match run(&cli.command, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) if e.is_config() => {
            eprintln!("qmetro: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("qmetro: numerical failure: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Io(p, e)) => {
            eprintln!("cannot write {}: {e}", p.display());
            ExitCode::from(1)
        }
    }
}
