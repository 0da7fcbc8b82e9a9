//! Finite-shot measurement simulation, maximum-likelihood estimation of `k`,
//! and estimator covariances (asymptotic propagation and Monte Carlo).

use log::warn;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::{bloch_jet, excited_state, BlochJet, BlochPoint, PureQubitState};
use crate::bounds::{classical_fim_from_jet, WeightMatrix};
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, wrap_difference, Mat2, Vec3};
use crate::povm::Povm;

pub const MLE_MAX_ITERATIONS: usize = 200;
pub const MLE_GRADIENT_TOLERANCE: f64 = 1e-10;
const MAX_HALVINGS: usize = 30;
/// Gradient level treated as converged once the line search can no longer increase ℓ.
const ROUNDOFF_GRADIENT: f64 = 1e-7;
const FIM_DET_TOLERANCE: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub seed: u64,
    #[serde(rename = "N")]
    pub shots: u64,
    pub counts: Vec<u64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub povm_id: String,
}

impl MeasurementRecord {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.shots as f64)
            .collect()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let rec: MeasurementRecord =
            serde_json::from_str(line).map_err(|e| Error::Serialization(e.to_string()))?;
        if rec.shots == 0 || rec.counts.iter().sum::<u64>() != rec.shots {
            return Err(Error::Serialization(format!(
                "counts {:?} do not sum to N = {}",
                rec.counts, rec.shots
            )));
        }
        Ok(rec)
    }
}

/// Seed of the `index`-th independent stream derived from `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Multinomial draw by sequential conditional binomials.
pub fn sample_counts(probabilities: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut counts = vec![0; probabilities.len()];
    let mut remaining = shots;
    let mut mass_left = 1.0;
    let last = probabilities.len().saturating_sub(1);
    for (i, &p) in probabilities.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        let q = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 0.0 };
        let c = Binomial::new(remaining, q)
            .expect("probability clamped into [0, 1]")
            .sample(rng);
        counts[i] = c;
        remaining -= c;
        mass_left -= p;
    }
    counts
}

pub fn sample_outcomes(povm: &Povm, state: &PureQubitState, shots: u64, seed: u64) -> Result<MeasurementRecord> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be at least 1".into()));
    }
    let probabilities = povm.outcome_probabilities(state);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(MeasurementRecord {
        seed,
        shots,
        counts: sample_counts(&probabilities, shots, &mut rng),
        povm_id: String::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleEstimate {
    pub point: BlochPoint,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Log-likelihood per shot, `Σ f_i log p_i`.
    pub log_likelihood: f64,
    /// Set when the ascent stalled away from a stationary point.
    pub degenerate: bool,
}

struct Likelihood<'a> {
    povm: &'a Povm,
    directions: Vec<Vec3>,
    frequencies: Vec<f64>,
    mass: f64,
}

struct LikelihoodEval {
    value: f64,
    gradient: [f64; 2],
    hessian: Mat2,
    jet: BlochJet,
}

impl Likelihood<'_> {
    fn eval(&self, k: [f64; 2]) -> Result<LikelihoodEval> {
        let jet = bloch_jet(&BlochPoint::new(k[0], k[1], self.mass))?;
        let mut value = 0.0;
        let mut gradient = [0.0; 2];
        let mut hessian = Mat2::zeros();
        for ((e, m), &f) in self.povm.elements.iter().zip(&self.directions).zip(&self.frequencies) {
            if f == 0.0 {
                continue;
            }
            let p = 0.5 * e.w * (1.0 + m.dot(&jet.n));
            if !(p > 0.0) {
                value = f64::NEG_INFINITY;
                continue;
            }
            let dp = [0.5 * e.w * m.dot(&jet.dn[0]), 0.5 * e.w * m.dot(&jet.dn[1])];
            value += f * p.ln();
            for a in 0..2 {
                gradient[a] += f * dp[a] / p;
                for b in 0..2 {
                    let d2p = 0.5 * e.w * m.dot(&jet.d2n[a][b]);
                    hessian[(a, b)] += f * (d2p / p - dp[a] * dp[b] / (p * p));
                }
            }
        }
        Ok(LikelihoodEval {
            value,
            gradient,
            hessian,
            jet,
        })
    }
}

fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Maximum-likelihood estimate of `k` by damped Newton ascent from `k_init`.
///
/// Falls back to a Fisher-scoring direction when the Hessian is not negative
/// definite. Zero counts drop out of the likelihood.
pub fn mle_estimate(povm: &Povm, record: &MeasurementRecord, mass: f64, k_init: [f64; 2]) -> Result<MleEstimate> {
    if record.counts.len() != povm.len() {
        return Err(Error::InvalidArgument(format!(
            "record has {} outcomes, POVM has {}",
            record.counts.len(),
            povm.len()
        )));
    }
    let lik = Likelihood {
        povm,
        directions: povm.elements.iter().map(|e| e.direction()).collect(),
        frequencies: record.frequencies(),
        mass,
    };
    let finish = |k: [f64; 2], it: usize, cur: &LikelihoodEval, degenerate: bool| MleEstimate {
        point: BlochPoint::new(k[0], k[1], mass),
        iterations: it,
        gradient_norm: norm2(cur.gradient),
        log_likelihood: cur.value,
        degenerate,
    };

    let mut k = [k_init[0], k_init[1]];
    let mut cur = lik.eval(k)?;
    if cur.value == f64::NEG_INFINITY {
        warn!("record is incompatible with the starting point; returning it unchanged");
        return Ok(finish(k, 0, &cur, true));
    }
    for it in 0..MLE_MAX_ITERATIONS {
        let gnorm = norm2(cur.gradient);
        if gnorm < MLE_GRADIENT_TOLERANCE {
            return Ok(finish(k, it, &cur, false));
        }
        let h = cur.hessian;
        let step = if h[(0, 0)] < 0.0 && h.determinant() > 0.0 {
            let inv = h.try_inverse().ok_or(Error::SingularFim { det: h.determinant() })?;
            -(inv * nalgebra::Vector2::new(cur.gradient[0], cur.gradient[1]))
        } else {
            let fim = classical_fim_from_jet(povm, &cur.jet)?;
            let det = fim.determinant();
            let inv = fim
                .try_inverse()
                .filter(|_| det.abs() > FIM_DET_TOLERANCE)
                .ok_or(Error::SingularFim { det })?;
            inv * nalgebra::Vector2::new(cur.gradient[0], cur.gradient[1])
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = [k[0] + t * step[0], k[1] + t * step[1]];
            let next = lik.eval(cand)?;
            let plateau = next.value >= cur.value - 1e-15 * cur.value.abs()
                && norm2(next.gradient) < gnorm;
            if next.value > cur.value || plateau {
                accepted = Some((cand, next));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, next)) => {
                k = cand;
                cur = next;
            }
            None if gnorm < ROUNDOFF_GRADIENT => return Ok(finish(k, it, &cur, false)),
            None => {
                warn!("likelihood ascent stalled with |grad| = {gnorm:e}");
                return Ok(finish(k, it, &cur, true));
            }
        }
    }
    if norm2(cur.gradient) < MLE_GRADIENT_TOLERANCE {
        return Ok(finish(k, MLE_MAX_ITERATIONS, &cur, false));
    }
    Err(Error::NonConvergence {
        iterations: MLE_MAX_ITERATIONS,
        residual: norm2(cur.gradient),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovarianceMethod {
    #[serde(rename = "asymptotic-eq2")]
    Asymptotic,
    #[serde(rename = "monte-carlo")]
    MonteCarlo,
    #[serde(rename = "fim-inverse")]
    FimInverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEstimate {
    pub sigma: Mat2,
    pub method: CovarianceMethod,
    pub shots: u64,
    pub trials: Option<usize>,
}

impl CovarianceEstimate {
    /// `(s11, s12, s22)`.
    pub fn entries(&self) -> [f64; 3] {
        [self.sigma[(0, 0)], self.sigma[(0, 1)], self.sigma[(1, 1)]]
    }

    pub const CSV_HEADER: &'static str = "s11,s12,s22";

    pub fn csv_row(&self) -> String {
        let [a, b, c] = self.entries();
        format!("{a:.16e},{b:.16e},{c:.16e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticCovariance {
    /// `(∂k̂/∂p̂) Σ(p̂) (∂k̂/∂p̂)ᵀ`.
    pub propagated: CovarianceEstimate,
    /// `F_C⁻¹ / N`.
    pub fim_inverse: CovarianceEstimate,
    /// Relative Frobenius distance between the two.
    pub identity_residual: f64,
}

/// Covariance of the MLE from first-order propagation of the multinomial
/// frequency covariance `Σ(p̂) = (diag p − p pᵀ)/N` through the implicit
/// derivative `∂k̂/∂p̂ = F_C⁻¹ L`, `L_aj = ∂_a log p_j`.
pub fn asymptotic_covariance(povm: &Povm, point: &BlochPoint, shots: u64) -> Result<AsymptoticCovariance> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be at least 1".into()));
    }
    let jet = bloch_jet(point)?;
    let fim = classical_fim_from_jet(povm, &jet)?;
    let det = fim.determinant();
    let fim_inv = fim
        .try_inverse()
        .filter(|_| det > 1e-14 * fim.norm_squared().max(1e-300))
        .ok_or(Error::SingularFim { det })?;

    // outcomes with p = 0 have zero derivative and drop out
    let mut probs = Vec::new();
    let mut scores: Vec<[f64; 2]> = Vec::new();
    for e in &povm.elements {
        let m = e.direction();
        let p = 0.5 * e.w * (1.0 + m.dot(&jet.n));
        if p <= crate::povm::PROBABILITY_FLOOR {
            continue;
        }
        probs.push(p);
        scores.push([0.5 * e.w * m.dot(&jet.dn[0]) / p, 0.5 * e.w * m.dot(&jet.dn[1]) / p]);
    }
    let outcomes = probs.len();
    let n = shots as f64;
    let sigma_p = nalgebra::DMatrix::from_fn(outcomes, outcomes, |i, j| {
        let diag = if i == j { probs[i] } else { 0.0 };
        (diag - probs[i] * probs[j]) / n
    });
    let l = nalgebra::DMatrix::from_fn(2, outcomes, |a, j| scores[j][a]);
    let fim_inv_dyn = nalgebra::DMatrix::from_fn(2, 2, |a, b| fim_inv[(a, b)]);
    let jac = fim_inv_dyn * l;
    let prop = &jac * sigma_p * jac.transpose();
    let propagated = symmetrize(&Mat2::new(prop[(0, 0)], prop[(0, 1)], prop[(1, 0)], prop[(1, 1)]));
    let inverse = symmetrize(&(fim_inv / n));
    Ok(AsymptoticCovariance {
        propagated: CovarianceEstimate {
            sigma: propagated,
            method: CovarianceMethod::Asymptotic,
            shots,
            trials: None,
        },
        fim_inverse: CovarianceEstimate {
            sigma: inverse,
            method: CovarianceMethod::FimInverse,
            shots,
            trials: None,
        },
        identity_residual: (propagated - inverse).norm() / inverse.norm(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloCovariance {
    pub estimate: CovarianceEstimate,
    /// Mean of the wrapped estimator offsets `k̂ − k`.
    pub mean_offset: [f64; 2],
    /// Standard error of `mean_offset`.
    pub stderr: [f64; 2],
    pub failures: usize,
    pub degenerate: usize,
}

/// Empirical covariance of the MLE over independent seeded trials, each started at the truth.
pub fn monte_carlo_covariance(
    povm: &Povm,
    point: &BlochPoint,
    shots: u64,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloCovariance> {
    if trials < 2 {
        return Err(Error::InvalidArgument("need at least 2 trials".into()));
    }
    let state = excited_state(point)?;
    let truth = point.k();
    let results: Vec<Result<([f64; 2], bool)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let record = sample_outcomes(povm, &state, shots, derive_seed(seed, t as u64))?;
            let est = mle_estimate(povm, &record, point.mass, truth)?;
            Ok((
                [
                    wrap_difference(est.point.k1 - truth[0]),
                    wrap_difference(est.point.k2 - truth[1]),
                ],
                est.degenerate,
            ))
        })
        .collect();

    let mut offsets = Vec::with_capacity(trials);
    let mut failures = 0;
    let mut degenerate = 0;
    let mut first_error = None;
    for r in results {
        match r {
            Ok((d, flag)) => {
                offsets.push(d);
                degenerate += flag as usize;
            }
            Err(e) => {
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if failures as f64 > 0.01 * trials as f64 || offsets.len() < 2 {
        return Err(Error::TrialFailures {
            failed: failures,
            trials,
            first: first_error.map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    let count = offsets.len() as f64;
    let mut mean = [0.0; 2];
    for d in &offsets {
        mean[0] += d[0] / count;
        mean[1] += d[1] / count;
    }
    let mut sigma = Mat2::zeros();
    for d in &offsets {
        let x = [d[0] - mean[0], d[1] - mean[1]];
        for a in 0..2 {
            for b in 0..2 {
                sigma[(a, b)] += x[a] * x[b];
            }
        }
    }
    sigma /= count - 1.0;
    Ok(MonteCarloCovariance {
        estimate: CovarianceEstimate {
            sigma,
            method: CovarianceMethod::MonteCarlo,
            shots,
            trials: Some(offsets.len()),
        },
        mean_offset: mean,
        stderr: [(sigma[(0, 0)] / count).sqrt(), (sigma[(1, 1)] / count).sqrt()],
        failures,
        degenerate,
    })
}

/// `√det Σ`, clamped at zero.
pub fn uncertainty_volume(c: &CovarianceEstimate) -> f64 {
    c.sigma.determinant().max(0.0).sqrt()
}

/// `Tr(W Σ)`.
pub fn weighted_variance(weight: &WeightMatrix, c: &CovarianceEstimate) -> f64 {
    (weight.matrix * c.sigma).trace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::classical_fim;
    use crate::povm::{sic_povm, trine_povm};
    use num_complex::Complex64;

    fn zero_state() -> PureQubitState {
        PureQubitState::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    #[test]
    fn large_sample_frequencies_match_born_rule() {
        let n = 1_000_000;
        let rec = sample_outcomes(&trine_povm(), &zero_state(), n, 17).unwrap();
        assert_eq!(rec.counts.iter().sum::<u64>(), n);
        for (f, p) in rec.frequencies().iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn single_shot_and_determinism() {
        let rec = sample_outcomes(&sic_povm(), &zero_state(), 1, 3).unwrap();
        assert_eq!(rec.counts.iter().filter(|&&c| c == 1).count(), 1);
        assert_eq!(rec.counts.iter().sum::<u64>(), 1);
        let a = sample_outcomes(&trine_povm(), &zero_state(), 500, 99).unwrap();
        let b = sample_outcomes(&trine_povm(), &zero_state(), 500, 99).unwrap();
        assert_eq!(a, b);
        assert!(sample_outcomes(&trine_povm(), &zero_state(), 0, 1).is_err());
    }

    #[test]
    fn record_json_lines() {
        let rec = MeasurementRecord {
            seed: 5,
            shots: 10,
            counts: vec![3, 7, 0],
            povm_id: String::new(),
        };
        let line = rec.to_json_line();
        assert_eq!(line, r#"{"seed":5,"N":10,"counts":[3,7,0]}"#);
        assert_eq!(MeasurementRecord::from_json_line(&line).unwrap(), rec);
        assert!(MeasurementRecord::from_json_line(r#"{"seed":5,"N":11,"counts":[3,7,0]}"#).is_err());
    }

    fn exact_record(povm: &Povm, point: &BlochPoint, shots: u64) -> MeasurementRecord {
        // counts proportional to p(k*) up to integer rounding; the estimate then solves the
        // score equation for these frequencies, not exactly k*
        let p = povm.outcome_probabilities(&excited_state(point).unwrap());
        let counts: Vec<u64> = p.iter().map(|x| (x * shots as f64).round() as u64).collect();
        let total = counts.iter().sum();
        MeasurementRecord { seed: 0, shots: total, counts, povm_id: String::new() }
    }

    #[test]
    fn mle_recovers_truth_from_exact_frequencies() {
        let povm = trine_povm();
        let truth = BlochPoint::new(1.0, 0.5, 1.0);
        let state = excited_state(&truth).unwrap();
        let p = povm.outcome_probabilities(&state);
        // exact frequencies: use a huge N with fractional counts emulated by scaling
        let shots = 1u64 << 50;
        let counts: Vec<u64> = p.iter().map(|x| (x * shots as f64) as u64).collect();
        let total: u64 = counts.iter().sum();
        let rec = MeasurementRecord { seed: 0, shots: total, counts, povm_id: String::new() };
        let est = mle_estimate(&povm, &rec, 1.0, [1.0, 0.5]).unwrap();
        assert!(!est.degenerate);
        assert!((est.point.k1 - 1.0).abs() < 1e-8 && (est.point.k2 - 0.5).abs() < 1e-8);

        // from a displaced start Newton still lands on the truth
        let est = mle_estimate(&povm, &rec, 1.0, [1.2, 0.3]).unwrap();
        assert!((est.point.k1 - 1.0).abs() < 1e-8 && (est.point.k2 - 0.5).abs() < 1e-8);
        assert!(est.gradient_norm < MLE_GRADIENT_TOLERANCE);
    }

    #[test]
    fn mle_tolerates_zero_counts() {
        let povm = trine_povm();
        let truth = BlochPoint::new(1.0, 0.5, 1.0);
        let mut rec = exact_record(&povm, &truth, 10_000);
        let moved = rec.counts[2];
        rec.counts[2] = 0;
        rec.counts[1] += moved;
        let est = mle_estimate(&povm, &rec, 1.0, truth.k()).unwrap();
        assert!(est.point.k1.is_finite() && est.point.k2.is_finite());
    }

    #[test]
    fn mle_rejects_mismatched_records() {
        let rec = MeasurementRecord { seed: 0, shots: 2, counts: vec![1, 1], povm_id: String::new() };
        assert!(mle_estimate(&trine_povm(), &rec, 1.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn asymptotic_covariance_identity_and_scaling() {
        let p = BlochPoint::new(1.0, 0.5, 1.0);
        let a = asymptotic_covariance(&trine_povm(), &p, 1000).unwrap();
        assert!(a.identity_residual < 1e-10);
        let f = classical_fim(&trine_povm(), &p).unwrap().matrix;
        let expected = f.try_inverse().unwrap() / 1000.0;
        assert!((a.propagated.sigma - expected).norm() < 1e-10 * expected.norm());
        let b = asymptotic_covariance(&trine_povm(), &p, 2000).unwrap();
        assert!((b.propagated.sigma * 2.0 - a.propagated.sigma).norm() < 1e-12 * a.propagated.sigma.norm());
        assert_eq!(a.propagated.method, CovarianceMethod::Asymptotic);
    }

    #[test]
    fn monte_carlo_tiny_and_deterministic() {
        let p = BlochPoint::new(1.0, 0.5, 1.0);
        let a = monte_carlo_covariance(&trine_povm(), &p, 1000, 2, 4).unwrap();
        assert_eq!(a.estimate.trials, Some(2));
        let [s11, s12, s22] = a.estimate.entries();
        assert!(s11 >= 0.0 && s22 >= 0.0 && s12.abs() <= (s11 * s22).sqrt() * (1.0 + 1e-12));
        let b = monte_carlo_covariance(&trine_povm(), &p, 1000, 2, 4).unwrap();
        assert_eq!(a, b);
        assert!(monte_carlo_covariance(&trine_povm(), &p, 1000, 1, 4).is_err());
    }

    #[test]
    fn volume_and_weighted_variance() {
        let c = CovarianceEstimate {
            sigma: Mat2::new(2.0, 0.0, 0.0, 8.0),
            method: CovarianceMethod::FimInverse,
            shots: 1,
            trials: None,
        };
        assert!((uncertainty_volume(&c) - 4.0).abs() < 1e-15);
        let scaled = CovarianceEstimate { sigma: c.sigma * 3.0, ..c };
        assert!((uncertainty_volume(&scaled) - 12.0).abs() < 1e-12);
        let id = WeightMatrix::custom(Mat2::identity()).unwrap();
        assert_eq!(weighted_variance(&id, &c), 10.0);
        let w = WeightMatrix::custom(Mat2::new(2.0, 0.5, 0.5, 1.0)).unwrap();
        let w2 = WeightMatrix::custom(w.matrix * 2.0).unwrap();
        assert!((weighted_variance(&w2, &c) - 2.0 * weighted_variance(&w, &c)).abs() < 1e-12);
        assert_eq!(c.csv_row(), "2.0000000000000000e0,0.0000000000000000e0,8.0000000000000000e0");
    }
}
