//! Search over three-element rank-one POVMs for the determinant-optimal POVM
//! and for POVMs minimizing a weighted classical Cramér-Rao bound.
//!
//! Three directions with positive weights can only balance (`Σ w_i m_i = 0`)
//! when they are coplanar, so the search runs over a plane normal (two angles)
//! and three in-plane angles. Weights are then fixed exactly by
//! [`feasible_povm`]; points whose directions lie in a half-plane are infeasible.

use nalgebra::{Matrix3, Matrix4x3, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::band::{bloch_jet, BlochJet, BlochPoint};
use crate::bounds::{classical_fim_from_jet, WeightMatrix};
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::povm::{Povm, PovmElement};
use crate::simplex::{Minimum, NelderMead};

pub const DEFAULT_RESTARTS: usize = 8;
pub const ITERATIONS_PER_RESTART: usize = 300;
pub const OBJECTIVE_TOLERANCE: f64 = 1e-10;
const POLISH_ROUNDS: usize = 3;
const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasiblePovm {
    pub povm: Povm,
    /// Some weight is (numerically) zero.
    pub degenerate: bool,
}

/// Solves `Σ w_i = 2`, `Σ w_i m_i = 0` for non-negative weights.
///
/// On failure the error carries a direction `v` with `v·m_i ≥ 0` for every
/// input direction, witnessing that no balanced positive combination exists.
pub fn feasible_povm(directions: &[Vec3; 3]) -> Result<FeasiblePovm> {
    let m = directions.map(|d| d.normalize());
    let a = Matrix4x3::from_fn(|r, c| if r == 0 { 1.0 } else { m[c][r - 1] });
    let b = Vector4::new(2.0, 0.0, 0.0, 0.0);
    let w = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let residual = (a * w - b).norm();
    if residual > 1e-9 || w.iter().any(|&x| x < -WEIGHT_TOLERANCE) {
        return Err(Error::InfeasibleDirections {
            certificate: separating_direction(&m).into(),
        });
    }
    let weights = w.map(|x| x.max(0.0));
    let degenerate = weights.iter().any(|&x| x <= WEIGHT_TOLERANCE);
    let povm = Povm::new(
        (0..3)
            .map(|i| PovmElement::from_direction(weights[i], &m[i]))
            .collect(),
    );
    Ok(FeasiblePovm { povm, degenerate })
}

fn separating_direction(m: &[Vec3; 3]) -> Vec3 {
    let mat = Matrix3::from_columns(m);
    if mat.determinant().abs() > 1e-9 {
        // v·m_i = 1 for all i
        if let Some(inv) = mat.transpose().try_inverse() {
            return (inv * Vector3::new(1.0, 1.0, 1.0)).normalize();
        }
    }
    // coplanar: centre of the smallest arc containing every direction
    let crosses = [m[0].cross(&m[1]), m[1].cross(&m[2]), m[0].cross(&m[2])];
    let largest = crosses
        .iter()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .copied()
        .unwrap_or_else(Vec3::zeros);
    let normal = if largest.norm() > 1e-12 {
        largest.normalize()
    } else {
        let seed = if m[0].x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        m[0].cross(&seed).normalize()
    };
    let e1 = m[0];
    let e2 = normal.cross(&e1);
    let mut angles: Vec<f64> = m.iter().map(|v| v.dot(&e2).atan2(v.dot(&e1))).collect();
    angles.sort_by(f64::total_cmp);
    let mut best_gap = -1.0;
    let mut gap_end = 0.0;
    for i in 0..3 {
        let from = angles[i];
        let to = if i == 2 { angles[0] + 2.0 * PI } else { angles[i + 1] };
        if to - from > best_gap {
            best_gap = to - from;
            gap_end = to;
        }
    }
    let centre = gap_end + 0.5 * (2.0 * PI - best_gap);
    e1 * centre.cos() + e2 * centre.sin()
}

/// Three unit directions from `[θ_normal, φ_normal, α1, α2, α3]`.
pub fn directions_from_params(x: &[f64]) -> [Vec3; 3] {
    let (st, ct) = x[0].sin_cos();
    let (sp, cp) = x[1].sin_cos();
    let normal = Vector3::new(st * cp, st * sp, ct);
    let e1 = Vector3::new(ct * cp, ct * sp, -st);
    let e2 = normal.cross(&e1);
    [x[2], x[3], x[4]].map(|a| e1 * a.cos() + e2 * a.sin())
}

fn random_params(rng: &mut ChaCha8Rng) -> [f64; 5] {
    let theta = rng.random_range(-1.0f64..1.0).acos();
    let phi = rng.random_range(0.0..2.0 * PI);
    let offset = rng.random_range(0.0..2.0 * PI);
    // jitter below π/3 keeps every gap under π, so the start is feasible
    let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-0.5..0.5);
    [
        theta,
        phi,
        offset + jitter(rng),
        offset + 2.0 * PI / 3.0 + jitter(rng),
        offset + 4.0 * PI / 3.0 + jitter(rng),
    ]
}

/// A random three-element POVM satisfying every completeness constraint.
pub fn random_feasible_povm(rng: &mut ChaCha8Rng) -> Povm {
    loop {
        if let Ok(f) = feasible_povm(&directions_from_params(&random_params(rng))) {
            if !f.degenerate {
                return f.povm;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    #[serde(rename = "det-fim")]
    DetFim,
    #[serde(rename = "weighted-crb")]
    WeightedCrb,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub povm: Povm,
    /// `det F_C` for [`ObjectiveKind::DetFim`], `Tr(W F_C⁻¹)` for [`ObjectiveKind::WeightedCrb`].
    pub objective: f64,
    pub objective_kind: ObjectiveKind,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective after each iteration of the winning restart.
    pub trace: Vec<f64>,
    /// Most extreme finite objective evaluated by any restart (max det, or min trace).
    pub extreme_evaluated: f64,
}

/// Objective in minimization form; `+∞` for infeasible or singular points.
fn povm_at(x: &[f64]) -> Option<Povm> {
    feasible_povm(&directions_from_params(x)).ok().map(|f| f.povm)
}

fn fim_at(x: &[f64], jet: &BlochJet) -> Option<nalgebra::Matrix2<f64>> {
    let povm = povm_at(x)?;
    classical_fim_from_jet(&povm, jet).ok()
}

struct RestartOutcome {
    min: Minimum,
    iterations: usize,
    extreme: f64,
}

fn run_restarts<F>(objective: F, restarts: usize, seed: u64) -> Result<Vec<RestartOutcome>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let outcomes: Vec<RestartOutcome> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let x0 = random_params(&mut rng);
            let mut extreme = f64::INFINITY;
            let mut tracked = |x: &[f64]| {
                let v = objective(x);
                if v.is_finite() {
                    extreme = extreme.min(v);
                }
                v
            };
            let nm = NelderMead {
                max_iterations: ITERATIONS_PER_RESTART,
                f_tolerance: OBJECTIVE_TOLERANCE,
                initial_step: 0.3,
            };
            let mut min = nm.minimize(&mut tracked, &x0);
            let mut iterations = min.iterations;
            let mut step = 0.05;
            for _ in 0..POLISH_ROUNDS {
                if min.converged || !min.value.is_finite() {
                    break;
                }
                let polish = NelderMead { initial_step: step, ..nm };
                let next = polish.minimize(&mut tracked, &min.x);
                iterations += next.iterations;
                let mut trace = std::mem::take(&mut min.trace);
                trace.extend(next.trace.iter().map(|v| v.min(min.value)));
                min = if next.value <= min.value { next } else { Minimum { converged: next.converged, ..min } };
                min.trace = trace;
                step *= 0.2;
            }
            RestartOutcome { min, iterations, extreme }
        })
        .collect();
    if outcomes.iter().all(|o| !o.min.value.is_finite()) {
        return Err(Error::AllRestartsInfeasible { restarts });
    }
    Ok(outcomes)
}

/// Picks the best restart; near-ties go to the lexicographically smallest serialized POVM.
fn select(outcomes: &[RestartOutcome]) -> (usize, Povm) {
    let best = outcomes
        .iter()
        .map(|o| o.min.value)
        .fold(f64::INFINITY, f64::min);
    let tie = 1e-12 * best.abs().max(1.0);
    outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.min.value <= best + tie)
        .filter_map(|(i, o)| povm_at(&o.min.x).map(|p| (i, p.canonical())))
        .min_by(|a, b| a.1.to_json().cmp(&b.1.to_json()).then(a.0.cmp(&b.0)))
        .expect("at least one finite restart")
}

/// The POVM maximizing `det F_C` at `point`.
pub fn optimize_det_fim(point: &BlochPoint, restarts: usize, seed: u64) -> Result<OptimizationResult> {
    let jet = bloch_jet(point)?;
    let objective = |x: &[f64]| fim_at(x, &jet).map_or(f64::INFINITY, |f| -f.determinant());
    let outcomes = run_restarts(objective, restarts, seed)?;
    let (winner, povm) = select(&outcomes);
    let fim = classical_fim_from_jet(&povm, &jet)?;
    let w = &outcomes[winner];
    Ok(OptimizationResult {
        objective: fim.determinant(),
        povm: povm.validate()?,
        objective_kind: ObjectiveKind::DetFim,
        iterations: w.iterations,
        converged: w.min.converged,
        trace: w.min.trace.iter().map(|v| -v).collect(),
        extreme_evaluated: -outcomes.iter().map(|o| o.extreme).fold(f64::INFINITY, f64::min),
    })
}

/// `Tr(W F⁻¹)`, or `+∞` when `F` is singular.
pub fn weighted_crb(weight: &WeightMatrix, fim: &nalgebra::Matrix2<f64>) -> f64 {
    let det = fim.determinant();
    if !(det > 1e-14 * fim.norm_squared()) {
        return f64::INFINITY;
    }
    fim.try_inverse()
        .map_or(f64::INFINITY, |inv| (weight.matrix * inv).trace())
}

/// The POVM minimizing the weighted classical bound `Tr(W F_C⁻¹)` at `point`.
pub fn optimize_weighted(
    weight: &WeightMatrix,
    point: &BlochPoint,
    restarts: usize,
    seed: u64,
) -> Result<OptimizationResult> {
    let jet = bloch_jet(point)?;
    let objective = |x: &[f64]| fim_at(x, &jet).map_or(f64::INFINITY, |f| weighted_crb(weight, &f));
    let outcomes = run_restarts(objective, restarts, seed)?;
    let (winner, povm) = select(&outcomes);
    let fim = classical_fim_from_jet(&povm, &jet)?;
    let w = &outcomes[winner];
    Ok(OptimizationResult {
        objective: weighted_crb(weight, &fim),
        povm: povm.validate()?,
        objective_kind: ObjectiveKind::WeightedCrb,
        iterations: w.iterations,
        converged: w.min.converged,
        trace: w.min.trace.clone(),
        extreme_evaluated: outcomes.iter().map(|o| o.extreme).fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{classical_fim, holevo_bound, jacobian_weight, qfi_matrix, WeightLabel};
    use crate::povm::{sic_povm, trine_povm};

    fn point() -> BlochPoint {
        BlochPoint::new(1.0, 0.5, 1.0)
    }

    #[test]
    fn trine_directions_get_equal_weights() {
        let dirs = trine_povm().elements.iter().map(|e| e.direction()).collect::<Vec<_>>();
        let f = feasible_povm(&[dirs[0], dirs[1], dirs[2]]).unwrap();
        assert!(!f.degenerate);
        for e in &f.povm.elements {
            assert!((e.w - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn antipodal_pair_is_boundary_feasible() {
        let f = feasible_povm(&[Vec3::z(), -Vec3::z(), Vec3::x()]).unwrap();
        assert!(f.degenerate);
        let w: Vec<f64> = f.povm.elements.iter().map(|e| e.w).collect();
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12 && w[2].abs() < 1e-12);
        f.povm.validate().unwrap();
    }

    #[test]
    fn half_space_directions_are_infeasible() {
        let dirs = [
            Vector3::new(1.0, 0.2, 0.1),
            Vector3::new(0.3, 1.0, 0.0),
            Vector3::new(0.2, -0.4, 1.0),
        ];
        match feasible_povm(&dirs) {
            Err(Error::InfeasibleDirections { certificate }) => {
                let v = Vector3::from(certificate);
                assert!(dirs.iter().all(|d| v.dot(&d.normalize()) >= -1e-12));
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        // coplanar but bunched in a half-plane
        let a = |t: f64| Vector3::new(t.cos(), 0.0, t.sin());
        match feasible_povm(&[a(0.1), a(0.9), a(2.0)]) {
            Err(Error::InfeasibleDirections { certificate }) => {
                let v = Vector3::from(certificate);
                assert!([0.1, 0.9, 2.0].iter().all(|&t| v.dot(&a(t)) > 0.0));
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn random_povms_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            random_feasible_povm(&mut rng).validate().unwrap();
        }
    }

    #[test]
    fn det_optimum_beats_fixed_povms_and_reaches_quarter_qfi() {
        let p = point();
        let r = optimize_det_fim(&p, DEFAULT_RESTARTS, 7).unwrap();
        let trine = classical_fim(&trine_povm(), &p).unwrap().det();
        let sic = classical_fim(&sic_povm(), &p).unwrap().det();
        assert!(r.objective >= trine && r.objective >= sic);
        // qubit pure states: Tr(𝓕⁻¹F_C) ≤ 1 bounds det F_C by det 𝓕 / 4
        let q = qfi_matrix(&p).unwrap().det();
        assert!(r.objective <= q / 4.0 * (1.0 + 1e-9));
        assert!(r.objective >= q / 4.0 * (1.0 - 1e-6));
        assert!(r.extreme_evaluated >= r.objective);
    }

    #[test]
    fn det_optimum_is_restart_robust() {
        let p = point();
        let a = optimize_det_fim(&p, 20, 1).unwrap();
        let b = optimize_det_fim(&p, 20, 2).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-6 * a.objective);
        let again = optimize_det_fim(&p, 20, 1).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn weighted_optimum_saturates_holevo() {
        let p = point();
        let w1 = WeightMatrix::new(qfi_matrix(&p).unwrap().matrix, WeightLabel::Qfi).unwrap();
        let r = optimize_weighted(&w1, &p, DEFAULT_RESTARTS, 3).unwrap();
        assert!((r.objective - 4.0).abs() < 0.02 * 4.0);
        assert!(r.extreme_evaluated >= 4.0 - 1e-9);

        let w2 = jacobian_weight(&p).unwrap();
        let ch = holevo_bound(&w2, &p).unwrap();
        let r = optimize_weighted(&w2, &p, DEFAULT_RESTARTS, 3).unwrap();
        assert!((r.objective - ch).abs() < 0.02 * ch);
        assert!(r.extreme_evaluated >= ch - 1e-9);
    }

    #[test]
    fn objective_is_label_invariant() {
        let p = point();
        let povm = random_feasible_povm(&mut ChaCha8Rng::seed_from_u64(9));
        let mut shuffled = povm.clone();
        shuffled.elements.rotate_left(1);
        shuffled.elements.swap(0, 1);
        let a = classical_fim(&povm, &p).unwrap().matrix;
        let b = classical_fim(&shuffled, &p).unwrap().matrix;
        assert!((a - b).norm() < 1e-12);
        assert_eq!(povm.canonical(), shuffled.canonical());
    }

    #[test]
    fn zero_restarts_rejected() {
        assert!(matches!(optimize_det_fim(&point(), 0, 1), Err(Error::InvalidArgument(_))));
    }
}
