//! Batch scenarios: trajectory scans, Holevo scans, mass sweeps, Chern reports
//! and single-point POVM optimization.

pub mod config;
pub mod scans;
pub mod table;

pub use config::{Overrides, PovmChoice, Scenario, ScenarioConfig, TrajectoryKind};
pub use scans::{
    run_chern_report, run_holevo_scan, run_mass_sweep, run_optimize_povm, run_trajectory_scan,
};
pub use table::{Cell, Table};
