//! Classical and quantum Fisher information and the Cramér-Rao-type bounds
//! built from them.

use nalgebra::{Matrix2, Matrix3x4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::band::{bloch_jet, qgt_analytic, BlochJet, BlochPoint, PureQubitState};
use crate::error::{Error, Result};
use crate::linalg::{is_positive_definite, sym_sqrt, symmetrize, trace_norm, Mat2, Vec3};
use crate::povm::{Povm, PROBABILITY_FLOOR};
use crate::simplex::NelderMead;

/// `det 𝓕` at or below this makes the quantum bounds undefined.
pub const QFI_DET_TOLERANCE: f64 = 1e-14;
/// Gradients of zero-probability outcomes below this count as vanishing.
const ZERO_GRADIENT_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FisherKind {
    Classical,
    QuantumSld,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherMatrix {
    pub matrix: Mat2,
    pub kind: FisherKind,
}

impl FisherMatrix {
    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightLabel {
    #[serde(rename = "W1-qfi")]
    Qfi,
    #[serde(rename = "W2-jacobian")]
    Jacobian,
    #[serde(rename = "custom")]
    Custom,
}

impl fmt::Display for WeightLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightLabel::Qfi => "W1-qfi",
            WeightLabel::Jacobian => "W2-jacobian",
            WeightLabel::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightMatrix {
    pub matrix: Mat2,
    pub label: WeightLabel,
}

impl WeightMatrix {
    pub fn new(matrix: Mat2, label: WeightLabel) -> Result<Self> {
        if !is_positive_definite(&matrix) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(WeightMatrix {
            matrix: symmetrize(&matrix),
            label,
        })
    }

    pub fn custom(matrix: Mat2) -> Result<Self> {
        WeightMatrix::new(matrix, WeightLabel::Custom)
    }

    /// Builds the labelled weight at `point`; `Custom` is rejected.
    pub fn at(label: WeightLabel, point: &BlochPoint) -> Result<Self> {
        match label {
            WeightLabel::Qfi => WeightMatrix::new(qfi_matrix(point)?.matrix, WeightLabel::Qfi),
            WeightLabel::Jacobian => jacobian_weight(point),
            WeightLabel::Custom => Err(Error::InvalidArgument(
                "custom weights need an explicit matrix".into(),
            )),
        }
    }
}

/// Classical Fisher information of `povm` on the upper-band state at `point`.
pub fn classical_fim(povm: &Povm, point: &BlochPoint) -> Result<FisherMatrix> {
    let jet = bloch_jet(point)?;
    Ok(FisherMatrix {
        matrix: classical_fim_from_jet(povm, &jet)?,
        kind: FisherKind::Classical,
    })
}

/// `F_ab = Σ_i ∂_a p_i ∂_b p_i / p_i` with `∂_a p_i = w_i m_i·∂_a n / 2`.
pub fn classical_fim_from_jet(povm: &Povm, jet: &BlochJet) -> Result<Mat2> {
    let mut f = Mat2::zeros();
    for (index, e) in povm.elements.iter().enumerate() {
        let m = e.direction();
        let p = 0.5 * e.w * (1.0 + m.dot(&jet.n));
        let grad = [0.5 * e.w * m.dot(&jet.dn[0]), 0.5 * e.w * m.dot(&jet.dn[1])];
        if p <= PROBABILITY_FLOOR {
            if grad[0].hypot(grad[1]) > ZERO_GRADIENT_TOLERANCE {
                return Err(Error::SingularOutcome { index });
            }
            continue;
        }
        for a in 0..2 {
            for b in 0..2 {
                f[(a, b)] += grad[a] * grad[b] / p;
            }
        }
    }
    Ok(f)
}

/// `𝓕 = 4g`.
pub fn qfi_matrix(point: &BlochPoint) -> Result<FisherMatrix> {
    Ok(FisherMatrix {
        matrix: qgt_analytic(point)?.g * 4.0,
        kind: FisherKind::QuantumSld,
    })
}

fn invertible_qfi(point: &BlochPoint) -> Result<(Mat2, Mat2, f64)> {
    let qgt = qgt_analytic(point)?;
    let qfi = qgt.g * 4.0;
    let det = qfi.determinant();
    if !(det > QFI_DET_TOLERANCE) {
        return Err(Error::DegenerateQfi { det });
    }
    let inv = qfi.try_inverse().ok_or(Error::DegenerateQfi { det })?;
    Ok((qfi, inv, qgt.omega12))
}

/// SLD Cramér-Rao bound `Tr(W 𝓕⁻¹)`.
pub fn sld_crb(weight: &WeightMatrix, point: &BlochPoint) -> Result<f64> {
    let (_, inv, _) = invertible_qfi(point)?;
    Ok((weight.matrix * inv).trace())
}

/// `‖2i 𝓕⁻¹ Ω‖_∞` for a given QFI and curvature.
pub fn r_parameter_from(qfi: &Mat2, omega12: f64) -> Result<f64> {
    let det = qfi.determinant();
    let inv = qfi
        .try_inverse()
        .filter(|_| det > QFI_DET_TOLERANCE)
        .ok_or(Error::DegenerateQfi { det })?;
    let omega = Matrix2::new(0.0, omega12, -omega12, 0.0);
    let a = (inv * omega * 2.0).map(|x| Complex64::new(0.0, x));
    // eigenvalues of a complex 2×2 from its characteristic polynomial
    let tr = a[(0, 0)] + a[(1, 1)];
    let dt = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let disc = (tr * tr - dt * 4.0).sqrt();
    let l1 = (tr + disc) * 0.5;
    let l2 = (tr - disc) * 0.5;
    Ok(l1.norm().max(l2.norm()))
}

pub fn r_parameter(point: &BlochPoint) -> Result<f64> {
    let (qfi, _, omega) = invertible_qfi(point)?;
    r_parameter_from(&qfi, omega)
}

/// Holevo bound for a two-parameter pure-state model:
/// `Tr(W𝓕⁻¹) + 4|Ω12| √det W / det 𝓕`.
pub fn holevo_closed_form(weight: &Mat2, qfi: &Mat2, omega12: f64) -> Result<f64> {
    let det = qfi.determinant();
    let inv = qfi
        .try_inverse()
        .filter(|_| det > QFI_DET_TOLERANCE)
        .ok_or(Error::DegenerateQfi { det })?;
    Ok((weight * inv).trace() + 4.0 * omega12.abs() * weight.determinant().max(0.0).sqrt() / det)
}

pub fn holevo_bound(weight: &WeightMatrix, point: &BlochPoint) -> Result<f64> {
    let (qfi, _, omega) = invertible_qfi(point)?;
    holevo_closed_form(&weight.matrix, &qfi, omega)
}

type CMat2 = [[Complex64; 2]; 2];

fn pauli_combination(x: &[f64]) -> CMat2 {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    [
        [c(x[0] + x[3], 0.0), c(x[1], -x[2])],
        [c(x[1], x[2]), c(x[0] - x[3], 0.0)],
    ]
}

fn apply(m: &CMat2, v: &[Complex64; 2]) -> [Complex64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// Holevo functional minimized directly over locally unbiased observables.
///
/// Observables are Hermitian `X_a = x0·𝟙 + x·σ`. The three linear conditions
/// `⟨ψ|X_a|ψ⟩ = 0` and `Tr(X_a ∂_b ρ) = δ_ab` leave one free coordinate per
/// observable; the resulting two-dimensional problem
/// `min Tr(W Re Z) + ‖√W Im Z √W‖₁`, `Z_ab = ⟨ψ|X_a X_b|ψ⟩`, is solved by simplex search.
pub fn holevo_variational(weight: &WeightMatrix, point: &BlochPoint) -> Result<f64> {
    invertible_qfi(point)?;
    let jet = bloch_jet(point)?;
    let psi = PureQubitState::from_bloch(&jet.n);
    // ∂_b ρ = ∂_b n·σ / 2, so Tr((x0 + x·σ) ∂_b ρ) = x·∂_b n
    let row = |x0: f64, v: &Vec3| [x0, v.x, v.y, v.z];
    let rows = [row(1.0, &jet.n), row(0.0, &jet.dn[0]), row(0.0, &jet.dn[1])];
    let a = Matrix3x4::from_fn(|r, c| rows[r][c]);
    let gram = a * a.transpose();
    let gram_inv = gram
        .try_inverse()
        .filter(|_| gram.determinant().abs() > 1e-20)
        .ok_or(Error::DegenerateQfi { det: 0.0 })?;
    // minimum-norm solutions of A x = e_b
    let pinv = a.transpose() * gram_inv;
    let base = [1, 2].map(|b| {
        let col = pinv.column(b);
        [col[0], col[1], col[2], col[3]]
    });
    // kernel of A by signed 3×3 minors
    let null: [f64; 4] = [0, 1, 2, 3].map(|skip| {
        let cols: Vec<usize> = (0..4).filter(|&c| c != skip).collect();
        let minor = nalgebra::Matrix3::from_fn(|r, c| a[(r, cols[c])]);
        let sign = if skip % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    });
    let sqrt_w = sym_sqrt(&weight.matrix);
    let w = weight.matrix;

    let objective = |t: &[f64]| -> f64 {
        let xs: Vec<[Complex64; 2]> = (0..2)
            .map(|a| {
                let coords: Vec<f64> = (0..4).map(|i| base[a][i] + t[a] * null[i]).collect();
                apply(&pauli_combination(&coords), &psi.amplitudes)
            })
            .collect();
        let z = |a: usize, b: usize| xs[a][0].conj() * xs[b][0] + xs[a][1].conj() * xs[b][1];
        let re = Matrix2::new(z(0, 0).re, z(0, 1).re, z(1, 0).re, z(1, 1).re);
        let im = Matrix2::new(z(0, 0).im, z(0, 1).im, z(1, 0).im, z(1, 1).im);
        (w * re).trace() + trace_norm(&(sqrt_w * im * sqrt_w))
    };
    let nm = NelderMead {
        max_iterations: 500,
        f_tolerance: 1e-12,
        initial_step: 1.0,
    };
    let min = nm.minimize(objective, &[0.0, 0.0]);
    if !min.converged {
        return Err(Error::NonConvergence {
            iterations: min.iterations,
            residual: f64::NAN,
        });
    }
    Ok(min.value)
}

/// Right-hand side of the Berry-curvature bound, `1 / (2N|Ω12|)`.
pub fn berry_bound(point: &BlochPoint, shots: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be at least 1".into()));
    }
    let omega = qgt_analytic(point)?.omega12;
    if omega == 0.0 || (4.0 * omega * omega) <= QFI_DET_TOLERANCE {
        return Err(Error::DegenerateQfi {
            det: 4.0 * omega * omega,
        });
    }
    Ok(1.0 / (2.0 * shots as f64 * omega.abs()))
}

/// Jacobian of `k ↦ (θ(k), φ(k))`, the spherical angles of `n(k)`.
pub fn spherical_jacobian(point: &BlochPoint) -> Result<(Mat2, f64)> {
    let jet = bloch_jet(point)?;
    let n = jet.n;
    if n.z.abs() >= 1.0 - 1e-10 {
        return Err(Error::PoleSingularity { n3: n.z });
    }
    let sin_theta = (1.0 - n.z * n.z).sqrt();
    let rho2 = n.x * n.x + n.y * n.y;
    let mut j = Mat2::zeros();
    for a in 0..2 {
        let dn = jet.dn[a];
        j[(0, a)] = -dn.z / sin_theta;
        j[(1, a)] = (n.x * dn.y - n.y * dn.x) / rho2;
    }
    Ok((j, sin_theta))
}

/// `W2 = JᵀJ` from the spherical-coordinate Jacobian.
pub fn jacobian_weight(point: &BlochPoint) -> Result<WeightMatrix> {
    let (j, _) = spherical_jacobian(point)?;
    WeightMatrix::new(j.transpose() * j, WeightLabel::Jacobian)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsReport {
    pub sld_crb: f64,
    pub holevo: f64,
    pub r_param: f64,
    pub berry_bound: f64,
}

pub fn bounds_report(weight: &WeightMatrix, point: &BlochPoint, shots: u64) -> Result<BoundsReport> {
    Ok(BoundsReport {
        sld_crb: sld_crb(weight, point)?,
        holevo: holevo_bound(weight, point)?,
        r_param: r_parameter(point)?,
        berry_bound: berry_bound(point, shots)?,
    })
}
