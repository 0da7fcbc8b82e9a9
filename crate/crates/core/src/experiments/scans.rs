//! Scenario runners. Each returns structured rows plus a CSV rendering.
//! Per-point failures land in the `error` column and the scan continues.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use super::config::{PovmChoice, Scenario};
use super::table::{Cell, Table};
use crate::band::{
    bloch_jet, chern_number, chern_sum, curvature_range, grid_coordinate, grid_sum, qgt_analytic,
    quantum_volume, BlochPoint,
};
use crate::bounds::{
    berry_bound, classical_fim, classical_fim_from_jet, holevo_bound, holevo_variational,
    qfi_matrix, r_parameter, sld_crb, WeightMatrix,
};
use crate::error::{Error, Result};
use crate::estimation::{
    asymptotic_covariance, derive_seed, monte_carlo_covariance, uncertainty_volume,
    weighted_variance,
};
use crate::optimizer::{optimize_det_fim, optimize_weighted, OptimizationResult};
use crate::povm::{sic_povm, trine_povm, Povm};

/// Masses reported by `chern-report` when the config lists none.
pub const DEFAULT_REPORT_MASSES: [f64; 8] = [-3.0, -2.5, -1.5, -1.0, 1.0, 1.5, 2.5, 3.0];
const DEFAULT_SPOT_TRIALS: usize = 200;

fn elements_string(povm: &Povm) -> String {
    povm.elements
        .iter()
        .map(|e| format!("{:.16e}:{:.16e}:{:.16e}", e.w, e.theta, e.phi))
        .collect::<Vec<_>>()
        .join(";")
}

fn join_errors(errors: &[String]) -> Cell {
    Cell::Text(errors.join("; "))
}

fn keep<T>(r: Result<T>, errors: &mut Vec<String>, what: &str) -> Option<T> {
    r.map_err(|e| errors.push(format!("{what}: {e}"))).ok()
}

pub fn povm_label(s: &Scenario) -> String {
    match s.measurement.povm {
        PovmChoice::Trine => "trine".into(),
        PovmChoice::Sic => "sic".into(),
        PovmChoice::File => "file".into(),
        PovmChoice::OptimizeDet => "optimize-det".into(),
        PovmChoice::OptimizeWeighted => format!("optimize-weighted:{}", s.measurement.weight),
    }
}

/// The configured POVM at `point`, optimizing if requested.
pub fn povm_at(s: &Scenario, point: &BlochPoint, seed: u64) -> Result<Povm> {
    if let Some(p) = s.fixed_povm() {
        return Ok(p);
    }
    Ok(optimize_at(s, point, seed)?.povm)
}

fn optimize_at(s: &Scenario, point: &BlochPoint, seed: u64) -> Result<OptimizationResult> {
    let restarts = s.measurement.restarts;
    match s.measurement.povm {
        PovmChoice::OptimizeWeighted => {
            let w = WeightMatrix::at(s.measurement.weight, point)?;
            optimize_weighted(&w, point, restarts, seed)
        }
        _ => optimize_det_fim(point, restarts, seed),
    }
}

fn asymptotic_volume(povm: &Povm, point: &BlochPoint, shots: u64) -> Result<f64> {
    Ok(uncertainty_volume(&asymptotic_covariance(povm, point, shots)?.propagated))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub index: usize,
    pub point: BlochPoint,
    pub povm: Option<Povm>,
    /// `√det Σ` from the asymptotic covariance of the configured POVM.
    pub volume: Option<f64>,
    pub mc_volume: Option<f64>,
    pub trine_volume: Option<f64>,
    pub sic_volume: Option<f64>,
    pub berry_bound: Option<f64>,
    pub omega12: Option<f64>,
    pub det_fc: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryScan {
    pub povm_label: String,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryScan {
    pub const HEADER: [&'static str; 14] = [
        "index",
        "k1",
        "k2",
        "mass",
        "povm",
        "vol_asymptotic",
        "vol_monte_carlo",
        "vol_trine",
        "vol_sic",
        "berry_bound",
        "omega12",
        "det_fc",
        "elements",
        "error",
    ];

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(Self::HEADER.to_vec());
        for r in &self.rows {
            t.push(vec![
                r.index.into(),
                r.point.k1.into(),
                r.point.k2.into(),
                r.point.mass.into(),
                self.povm_label.as_str().into(),
                Cell::opt(r.volume),
                Cell::opt(r.mc_volume),
                Cell::opt(r.trine_volume),
                Cell::opt(r.sic_volume),
                Cell::opt(r.berry_bound),
                Cell::opt(r.omega12),
                Cell::opt(r.det_fc),
                r.povm.as_ref().map_or(Cell::Empty, |p| elements_string(p).into()),
                join_errors(&r.errors),
            ]);
        }
        t
    }
}

pub fn run_trajectory_scan(s: &Scenario) -> Result<TrajectoryScan> {
    let points = s.trajectory.points(s.mass)?;
    let shots = s.measurement.shots;
    let trials = s.measurement.trials;
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(index, point)| {
            let seed = derive_seed(s.seed, index as u64);
            let mut errors = Vec::new();
            let e = &mut errors;
            let povm = keep(povm_at(s, point, derive_seed(seed, 0)), e, "povm");
            let volume = povm
                .as_ref()
                .and_then(|p| keep(asymptotic_volume(p, point, shots), e, "asymptotic"));
            let det_fc = povm
                .as_ref()
                .and_then(|p| keep(classical_fim(p, point).map(|f| f.det()), e, "fisher"));
            let mc_volume = match (&povm, trials) {
                (Some(p), t) if t >= 2 => keep(
                    monte_carlo_covariance(p, point, shots, t, derive_seed(seed, 1))
                        .map(|mc| uncertainty_volume(&mc.estimate)),
                    e,
                    "monte-carlo",
                ),
                _ => None,
            };
            let trine_volume = keep(asymptotic_volume(&trine_povm(), point, shots), e, "trine");
            let sic_volume = keep(asymptotic_volume(&sic_povm(), point, shots), e, "sic");
            let berry = keep(berry_bound(point, shots), e, "berry");
            let omega12 = keep(qgt_analytic(point).map(|q| q.omega12), e, "qgt");
            TrajectoryRow {
                index,
                point: *point,
                povm,
                volume,
                mc_volume,
                trine_volume,
                sic_volume,
                berry_bound: berry,
                omega12,
                det_fc,
                errors,
            }
        })
        .collect();
    Ok(TrajectoryScan { povm_label: povm_label(s), rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolevoRow {
    pub index: usize,
    pub point: BlochPoint,
    pub povm: Option<Povm>,
    /// `N · Tr(W Σ)` for the optimized POVM.
    pub weighted_crb: Option<f64>,
    pub holevo: Option<f64>,
    pub holevo_variational: Option<f64>,
    pub sld: Option<f64>,
    pub r_param: Option<f64>,
    pub errors: Vec<String>,
}

impl HolevoRow {
    pub fn one_plus_r(&self) -> Option<f64> {
        self.r_param.map(|r| 1.0 + r)
    }

    pub fn ratio(&self) -> Option<f64> {
        Some(self.holevo? / self.sld?)
    }

    pub fn gap(&self) -> Option<f64> {
        Some(self.weighted_crb? / self.holevo? - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolevoScan {
    pub weight_label: String,
    pub rows: Vec<HolevoRow>,
}

impl HolevoScan {
    pub const HEADER: [&'static str; 15] = [
        "index",
        "k1",
        "k2",
        "mass",
        "weight",
        "trace_w_sigma_n",
        "holevo",
        "holevo_variational",
        "sld",
        "one_plus_r",
        "ratio",
        "relative_gap",
        "shots",
        "elements",
        "error",
    ];

    pub fn to_table(&self, shots: u64) -> Table {
        let mut t = Table::new(Self::HEADER.to_vec());
        for r in &self.rows {
            t.push(vec![
                r.index.into(),
                r.point.k1.into(),
                r.point.k2.into(),
                r.point.mass.into(),
                self.weight_label.as_str().into(),
                Cell::opt(r.weighted_crb),
                Cell::opt(r.holevo),
                Cell::opt(r.holevo_variational),
                Cell::opt(r.sld),
                Cell::opt(r.one_plus_r()),
                Cell::opt(r.ratio()),
                Cell::opt(r.gap()),
                Cell::Int(shots as i64),
                r.povm.as_ref().map_or(Cell::Empty, |p| elements_string(p).into()),
                join_errors(&r.errors),
            ]);
        }
        t
    }
}

pub fn run_holevo_scan(s: &Scenario) -> Result<HolevoScan> {
    let points = s.trajectory.points(s.mass)?;
    let label = s.measurement.weight;
    let shots = s.measurement.shots;
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(index, point)| {
            let seed = derive_seed(s.seed, index as u64);
            let mut errors = Vec::new();
            let e = &mut errors;
            let weight = keep(WeightMatrix::at(label, point), e, "weight");
            let (povm, weighted_crb, holevo, holevo_var, sld) = match &weight {
                Some(w) => {
                    let povm = keep(
                        optimize_weighted(w, point, s.measurement.restarts, derive_seed(seed, 0)),
                        e,
                        "optimizer",
                    )
                    .map(|r| r.povm);
                    let crb = povm.as_ref().and_then(|p| {
                        keep(
                            asymptotic_covariance(p, point, shots)
                                .map(|c| weighted_variance(w, &c.propagated) * shots as f64),
                            e,
                            "asymptotic",
                        )
                    });
                    (
                        povm,
                        crb,
                        keep(holevo_bound(w, point), e, "holevo"),
                        keep(holevo_variational(w, point), e, "holevo-variational"),
                        keep(sld_crb(w, point), e, "sld"),
                    )
                }
                None => (None, None, None, None, None),
            };
            let r_param = keep(r_parameter(point), e, "r");
            HolevoRow {
                index,
                point: *point,
                povm,
                weighted_crb,
                holevo,
                holevo_variational: holevo_var,
                sld,
                r_param,
                errors,
            }
        })
        .collect();
    Ok(HolevoScan { weight_label: label.to_string(), rows })
}

/// `∫ √det F_C d²k` over the Brillouin zone for a fixed POVM (midpoint rule).
pub fn metrological_potential(povm: &Povm, mass: f64, grid_n: usize) -> Result<f64> {
    let cell = (2.0 * PI / grid_n as f64).powi(2);
    let total = grid_sum(grid_n, |i, j| {
        let p = BlochPoint::new(grid_coordinate(i, grid_n), grid_coordinate(j, grid_n), mass);
        let f = classical_fim_from_jet(povm, &bloch_jet(&p)?)?;
        Ok(f.determinant().max(0.0).sqrt())
    })?;
    Ok(total * cell)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mass: f64,
    pub chern: Option<i64>,
    pub volume: Option<f64>,
    pub potential: Option<f64>,
    pub errors: Vec<String>,
}

impl SweepRow {
    pub fn four_volume(&self) -> Option<f64> {
        self.volume.map(|v| 4.0 * v)
    }

    pub fn bound_holds(&self) -> Option<bool> {
        Some(self.potential? <= self.four_volume()?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpotCheck {
    pub index: usize,
    pub point: BlochPoint,
    pub asymptotic_volume: Option<f64>,
    pub mc_volume: Option<f64>,
    pub trials: usize,
    pub failures: Option<usize>,
    pub errors: Vec<String>,
}

impl SpotCheck {
    pub fn relative_deviation(&self) -> Option<f64> {
        Some(self.mc_volume? / self.asymptotic_volume? - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassSweep {
    pub rows: Vec<SweepRow>,
    pub spot_checks: Vec<SpotCheck>,
}

impl MassSweep {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(vec!["mass", "chern", "vol_g", "four_vol_g", "m_p", "bound_holds", "error"]);
        for r in &self.rows {
            t.push(vec![
                r.mass.into(),
                r.chern.map_or(Cell::Empty, Cell::Int),
                Cell::opt(r.volume),
                Cell::opt(r.four_volume()),
                Cell::opt(r.potential),
                r.bound_holds().map_or(Cell::Empty, |b| b.to_string().into()),
                join_errors(&r.errors),
            ]);
        }
        t
    }

    pub fn spot_table(&self) -> Table {
        let mut t = Table::new(vec![
            "index",
            "k1",
            "k2",
            "mass",
            "vol_asymptotic",
            "vol_monte_carlo",
            "relative_deviation",
            "trials",
            "failures",
            "error",
        ]);
        for c in &self.spot_checks {
            t.push(vec![
                c.index.into(),
                c.point.k1.into(),
                c.point.k2.into(),
                c.point.mass.into(),
                Cell::opt(c.asymptotic_volume),
                Cell::opt(c.mc_volume),
                Cell::opt(c.relative_deviation()),
                c.trials.into(),
                c.failures.map_or(Cell::Empty, |f| f.into()),
                join_errors(&c.errors),
            ]);
        }
        t
    }
}

/// Quantum volume, Chern number and trine metrological potential per mass,
/// plus Monte Carlo spot checks of the asymptotic volume along the trajectory.
pub fn run_mass_sweep(s: &Scenario) -> Result<MassSweep> {
    let masses = s.sweep.masses()?;
    let grid_n = s.grid_n;
    let trine = trine_povm();
    let rows = masses
        .par_iter()
        .map(|&mass| {
            let mut errors = Vec::new();
            let e = &mut errors;
            SweepRow {
                mass,
                chern: keep(chern_number(mass, grid_n), e, "chern"),
                volume: keep(quantum_volume(mass, grid_n), e, "volume"),
                potential: keep(metrological_potential(&trine, mass, grid_n), e, "potential"),
                errors,
            }
        })
        .collect();

    let trajectory = s.trajectory.points(s.mass)?;
    let count = s.sweep.spot_checks.min(trajectory.len());
    let trials = if s.measurement.trials >= 2 { s.measurement.trials } else { DEFAULT_SPOT_TRIALS };
    let shots = s.measurement.shots;
    let spot_checks = (0..count)
        .into_par_iter()
        .map(|j| {
            let index = j * trajectory.len() / count;
            let point = trajectory[index];
            let mut errors = Vec::new();
            let e = &mut errors;
            let asymptotic_volume = keep(asymptotic_volume(&trine, &point, shots), e, "asymptotic");
            let mc = keep(
                monte_carlo_covariance(&trine, &point, shots, trials, derive_seed(s.seed, index as u64)),
                e,
                "monte-carlo",
            );
            SpotCheck {
                index,
                point,
                asymptotic_volume,
                mc_volume: mc.as_ref().map(|m| uncertainty_volume(&m.estimate)),
                trials,
                failures: mc.map(|m| m.failures),
                errors,
            }
        })
        .collect();
    Ok(MassSweep { rows, spot_checks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChernRow {
    pub mass: f64,
    pub chern: Option<i64>,
    pub chern_sum: Option<f64>,
    pub volume: Option<f64>,
    pub curvature: Option<(f64, f64)>,
    pub errors: Vec<String>,
}

impl ChernRow {
    /// `vol_g / (π |Ch|)`, infinite for a trivial band.
    pub fn saturation(&self) -> Option<f64> {
        let ch = self.chern?;
        let v = self.volume?;
        Some(if ch == 0 { f64::INFINITY } else { v / (PI * ch.unsigned_abs() as f64) })
    }
}

pub fn chern_report_masses(s: &Scenario) -> Result<Vec<f64>> {
    match &s.sweep.masses {
        Some(_) => s.sweep.masses(),
        None => Ok(DEFAULT_REPORT_MASSES.to_vec()),
    }
}

pub fn run_chern_report(masses: &[f64], grid_n: usize) -> Vec<ChernRow> {
    masses
        .par_iter()
        .map(|&mass| {
            let mut errors = Vec::new();
            let e = &mut errors;
            ChernRow {
                mass,
                chern: keep(chern_number(mass, grid_n), e, "chern"),
                chern_sum: keep(chern_sum(mass, grid_n), e, "chern-sum"),
                volume: keep(quantum_volume(mass, grid_n), e, "volume"),
                curvature: keep(curvature_range(mass, grid_n), e, "curvature"),
                errors,
            }
        })
        .collect()
}

pub fn chern_table(rows: &[ChernRow]) -> Table {
    let mut t = Table::new(vec![
        "mass",
        "chern",
        "chern_sum",
        "vol_g",
        "saturation_ratio",
        "curvature_min",
        "curvature_max",
        "error",
    ]);
    for r in rows {
        t.push(vec![
            r.mass.into(),
            r.chern.map_or(Cell::Empty, Cell::Int),
            Cell::opt(r.chern_sum),
            Cell::opt(r.volume),
            Cell::opt(r.saturation()),
            Cell::opt(r.curvature.map(|c| c.0)),
            Cell::opt(r.curvature.map(|c| c.1)),
            join_errors(&r.errors),
        ]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationSummary {
    pub point: BlochPoint,
    pub seed: u64,
    pub objective_kind: crate::optimizer::ObjectiveKind,
    pub objective: f64,
    /// `det 𝓕 / 4` for the determinant objective, `C^H` for the weighted one.
    pub reference: f64,
    pub weight: Option<String>,
    pub converged: bool,
    pub iterations: usize,
    pub povm: Povm,
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl OptimizationSummary {
    pub fn trace_table(&self) -> Table {
        let mut t = Table::new(vec!["iteration", "objective"]);
        for (i, v) in self.trace.iter().enumerate() {
            t.push(vec![i.into(), (*v).into()]);
        }
        t
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Optimizes the POVM at `[point]`; the objective follows `measurement.povm`.
pub fn run_optimize_povm(s: &Scenario) -> Result<OptimizationSummary> {
    let p = s
        .point
        .ok_or_else(|| Error::Config("optimize-povm needs a [point] section".into()))?;
    let point = BlochPoint::new(p.k1, p.k2, s.mass);
    let weighted = match s.measurement.povm {
        PovmChoice::OptimizeDet => false,
        PovmChoice::OptimizeWeighted => true,
        other => {
            return Err(Error::Config(format!(
                "optimize-povm needs measurement.povm = optimize-det or optimize-weighted, got {other:?}"
            )))
        }
    };
    let result = optimize_at(s, &point, s.seed)?;
    let reference = if weighted {
        holevo_bound(&WeightMatrix::at(s.measurement.weight, &point)?, &point)?
    } else {
        qfi_matrix(&point)?.det() / 4.0
    };
    Ok(OptimizationSummary {
        point,
        seed: s.seed,
        objective_kind: result.objective_kind,
        objective: result.objective,
        reference,
        weight: weighted.then(|| s.measurement.weight.to_string()),
        converged: result.converged,
        iterations: result.iterations,
        povm: result.povm,
        trace: result.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::{Overrides, ScenarioConfig};

    fn scenario(text: &str) -> Scenario {
        ScenarioConfig::from_toml_str(text)
            .unwrap()
            .resolve(&Overrides::default(), None)
            .unwrap()
    }

    #[test]
    fn trajectory_scan_orders_volumes() {
        let s = scenario("seed = 4\n[trajectory]\nsamples = 8\n[measurement]\nrestarts = 4");
        let scan = run_trajectory_scan(&s).unwrap();
        assert_eq!(scan.rows.len(), 8);
        for r in &scan.rows {
            assert!(r.errors.is_empty(), "{:?}", r.errors);
            let v = r.volume.unwrap();
            assert!(v <= r.trine_volume.unwrap() * (1.0 + 1e-9));
            assert!(v <= r.sic_volume.unwrap() * (1.0 + 1e-9));
            assert!(v > r.berry_bound.unwrap());
        }
        let csv = scan.to_table().to_csv();
        assert!(csv.starts_with("index,k1,k2,mass,povm,"));
        assert!(!csv.contains("NaN"));
        assert_eq!(csv.lines().count(), 9);
    }

    #[test]
    fn scans_are_reproducible() {
        let s = scenario("seed = 11\n[trajectory]\nsamples = 4\n[measurement]\npovm = \"trine\"\ntrials = 20\nshots = 200");
        let a = run_trajectory_scan(&s).unwrap().to_table().to_csv();
        let b = run_trajectory_scan(&s).unwrap().to_table().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn holevo_scan_hits_the_bound() {
        let s = scenario("seed = 2\n[trajectory]\nkind = \"fixed-k2\"\nsamples = 6\n[measurement]\npovm = \"optimize-weighted\"");
        let scan = run_holevo_scan(&s).unwrap();
        for r in &scan.rows {
            assert!(r.errors.is_empty(), "{:?}", r.errors);
            assert!(r.gap().unwrap().abs() < 0.02);
            assert!((r.ratio().unwrap() - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn critical_masses_become_row_errors() {
        let rows = run_chern_report(&[1.0, 2.0, 3.0], 16);
        assert_eq!(rows[0].chern.map(i64::abs), Some(1));
        assert!(rows[1].chern.is_none() && !rows[1].errors.is_empty());
        assert_eq!(rows[2].saturation(), Some(f64::INFINITY));
        let csv = chern_table(&rows).to_csv();
        assert!(csv.contains(",inf,"));
    }

    #[test]
    fn potential_is_bounded_by_volume() {
        let trine = trine_povm();
        for m in [0.5, 1.0, 2.5] {
            let mp = metrological_potential(&trine, m, 32).unwrap();
            let v = quantum_volume(m, 32).unwrap();
            assert!(mp <= 4.0 * v, "M={m}: {mp} vs {}", 4.0 * v);
        }
    }

    #[test]
    fn optimize_povm_needs_point_and_objective() {
        let s = scenario("seed = 1");
        assert!(matches!(run_optimize_povm(&s), Err(Error::Config(_))));
        let s = scenario("seed = 1\n[point]\nk1 = 1.0\nk2 = 0.5\n[measurement]\npovm = \"sic\"");
        assert!(matches!(run_optimize_povm(&s), Err(Error::Config(_))));
        let s = scenario("seed = 1\n[point]\nk1 = 1.0\nk2 = 0.5");
        let r = run_optimize_povm(&s).unwrap();
        assert!((r.objective / r.reference - 1.0).abs() < 1e-6);
        assert!(Povm::from_json(&r.povm.to_json()).unwrap().validate().is_ok());
    }
}
