//! Scenario configuration, read from TOML. Unknown keys are rejected.

use serde::Deserialize;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::band::{BlochPoint, DEFAULT_GRID_N, MIN_GRID_N};
use crate::bounds::WeightLabel;
use crate::error::{Error, Result};
use crate::optimizer::DEFAULT_RESTARTS;
use crate::povm::{sic_povm, trine_povm, Povm};

pub const DEFAULT_SHOTS: u64 = 1000;
pub const DEFAULT_SAMPLES: usize = 40;
pub const DEFAULT_FIXED_K2: f64 = 1.0;
pub const CRITICAL_MASSES: [f64; 3] = [-2.0, 0.0, 2.0];
pub const CRITICAL_EXCLUSION: f64 = 0.05;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: Option<u64>,
    pub grid_n: Option<usize>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub measurement: MeasurementConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub point: Option<PointConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mass: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { mass: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    Diagonal,
    FixedK2,
    ExplicitList,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default = "default_kind")]
    pub kind: TrajectoryKind,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_k2")]
    pub k2: f64,
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
}

fn default_kind() -> TrajectoryKind {
    TrajectoryKind::Diagonal
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_k2() -> f64 {
    DEFAULT_FIXED_K2
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            kind: default_kind(),
            samples: DEFAULT_SAMPLES,
            k2: DEFAULT_FIXED_K2,
            points: Vec::new(),
        }
    }
}

/// Path parameter of the closed trajectories, sampled at cell midpoints of `[−π, π)`.
///
/// Midpoints keep the samples off `t = 0, ±π/2, −π`, where the diagonal passes
/// through Bloch-sphere poles or zeros of the curvature.
pub fn trajectory_parameter(i: usize, samples: usize) -> f64 {
    -PI + (i as f64 + 0.5) * 2.0 * PI / samples as f64
}

impl TrajectoryConfig {
    pub fn points(&self, mass: f64) -> Result<Vec<BlochPoint>> {
        match self.kind {
            TrajectoryKind::Diagonal | TrajectoryKind::FixedK2 => {
                if self.samples < 2 {
                    return Err(Error::Config(format!(
                        "trajectory.samples must be at least 2, got {}",
                        self.samples
                    )));
                }
                if !self.k2.is_finite() {
                    return Err(Error::Config("trajectory.k2 must be finite".into()));
                }
                Ok((0..self.samples)
                    .map(|i| {
                        let t = trajectory_parameter(i, self.samples);
                        match self.kind {
                            TrajectoryKind::Diagonal => BlochPoint::new(t, t, mass),
                            _ => BlochPoint::new(t, self.k2, mass),
                        }
                    })
                    .collect())
            }
            TrajectoryKind::ExplicitList => {
                if self.points.len() < 2 {
                    return Err(Error::Config(
                        "explicit-list trajectory needs at least 2 points".into(),
                    ));
                }
                if self.points.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::Config("trajectory points must be finite".into()));
                }
                Ok(self
                    .points
                    .iter()
                    .map(|&[k1, k2]| BlochPoint::new(k1, k2, mass))
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PovmChoice {
    Trine,
    Sic,
    OptimizeDet,
    OptimizeWeighted,
    File,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    #[serde(default = "default_povm")]
    pub povm: PovmChoice,
    #[serde(default = "default_weight")]
    pub weight: WeightLabel,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub trials: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    pub povm_path: Option<PathBuf>,
}

fn default_povm() -> PovmChoice {
    PovmChoice::OptimizeDet
}
fn default_weight() -> WeightLabel {
    WeightLabel::Qfi
}
fn default_shots() -> u64 {
    DEFAULT_SHOTS
}
fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        MeasurementConfig {
            povm: default_povm(),
            weight: default_weight(),
            shots: DEFAULT_SHOTS,
            trials: 0,
            restarts: DEFAULT_RESTARTS,
            povm_path: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub masses: Option<Vec<f64>>,
    #[serde(default = "default_start")]
    pub start: f64,
    #[serde(default = "default_stop")]
    pub stop: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Masses within this distance of a gap closing (0, ±2) are dropped from ranges.
    #[serde(default = "default_exclusion")]
    pub exclude_radius: f64,
    #[serde(default = "default_spot_checks")]
    pub spot_checks: usize,
}

fn default_start() -> f64 {
    0.25
}
fn default_stop() -> f64 {
    3.75
}
fn default_step() -> f64 {
    0.25
}
fn default_exclusion() -> f64 {
    CRITICAL_EXCLUSION
}
fn default_spot_checks() -> usize {
    5
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            masses: None,
            start: default_start(),
            stop: default_stop(),
            step: default_step(),
            exclude_radius: CRITICAL_EXCLUSION,
            spot_checks: default_spot_checks(),
        }
    }
}

impl SweepConfig {
    /// Explicit masses are used as given; ranges skip the critical neighbourhoods.
    pub fn masses(&self) -> Result<Vec<f64>> {
        if let Some(m) = &self.masses {
            if m.is_empty() || m.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("sweep.masses must be finite and non-empty".into()));
            }
            return Ok(m.clone());
        }
        if !(self.step > 0.0) || !(self.stop >= self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::Config(format!(
                "invalid sweep range start={} stop={} step={}",
                self.start, self.stop, self.step
            )));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count)
            .map(|i| self.start + i as f64 * self.step)
            .filter(|m| {
                CRITICAL_MASSES
                    .iter()
                    .all(|c| (m - c).abs() >= self.exclude_radius)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub k1: f64,
    pub k2: f64,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid_n: Option<usize>,
    pub output: Option<PathBuf>,
}

/// A configuration with every mandatory value resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub grid_n: usize,
    pub output: Option<PathBuf>,
    pub mass: f64,
    pub trajectory: TrajectoryConfig,
    pub measurement: MeasurementConfig,
    pub sweep: SweepConfig,
    pub point: Option<PointConfig>,
    /// Loaded when `measurement.povm = "file"`.
    pub file_povm: Option<Povm>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Applies overrides and validates. `base_dir` anchors a relative `povm_path`.
    pub fn resolve(self, overrides: &Overrides, base_dir: Option<&Path>) -> Result<Scenario> {
        let seed = overrides
            .seed
            .or(self.seed)
            .ok_or_else(|| Error::Config("a seed is required (config `seed` or --seed)".into()))?;
        let grid_n = overrides.grid_n.or(self.grid_n).unwrap_or(DEFAULT_GRID_N);
        if grid_n < MIN_GRID_N {
            return Err(Error::Config(format!("grid_n must be at least {MIN_GRID_N}, got {grid_n}")));
        }
        let mass = self.model.mass;
        if !mass.is_finite() {
            return Err(Error::Config("model.mass must be finite".into()));
        }
        let m = &self.measurement;
        if m.shots == 0 {
            return Err(Error::Config("measurement.shots must be positive".into()));
        }
        if m.trials == 1 {
            return Err(Error::Config("measurement.trials must be 0 or at least 2".into()));
        }
        if m.restarts == 0 {
            return Err(Error::Config("measurement.restarts must be positive".into()));
        }
        if m.weight == WeightLabel::Custom {
            return Err(Error::Config("measurement.weight must be W1-qfi or W2-jacobian".into()));
        }
        let file_povm = match (m.povm, &m.povm_path) {
            (PovmChoice::File, Some(p)) => {
                let path = match base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                let povm = Povm::from_json(&text)
                    .and_then(Povm::validate)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                Some(povm)
            }
            (PovmChoice::File, None) => {
                return Err(Error::Config("measurement.povm = \"file\" needs povm_path".into()))
            }
            _ => None,
        };
        if let Some(p) = &self.point {
            if !p.k1.is_finite() || !p.k2.is_finite() {
                return Err(Error::Config("point coordinates must be finite".into()));
            }
        }
        Ok(Scenario {
            seed,
            grid_n,
            output: overrides.output.clone().or(self.output),
            mass,
            trajectory: self.trajectory,
            measurement: self.measurement,
            sweep: self.sweep,
            point: self.point,
            file_povm,
        })
    }
}

impl Scenario {
    /// The fixed POVM for `trine`, `sic` and `file`; `None` for optimized choices.
    pub fn fixed_povm(&self) -> Option<Povm> {
        match self.measurement.povm {
            PovmChoice::Trine => Some(trine_povm()),
            PovmChoice::Sic => Some(sic_povm()),
            PovmChoice::File => self.file_povm.clone(),
            _ => None,
        }
    }
}
