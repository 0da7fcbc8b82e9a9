//! Rank-one qubit POVMs `Π_i = |e_i⟩⟨e_i|` with
//! `|e_i⟩ = r_i (cos(θ_i/2)|0⟩ + sin(θ_i/2) e^{iφ_i}|−1⟩)` and weight `w_i = r_i²`.
//!
//! Completeness `Σ Π_i = 𝟙` is equivalent to `Σ w_i = 2` together with
//! `Σ w_i m_i = 0`, where `m_i` is the Bloch direction of element `i`.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::band::{BlochPoint, PureQubitState};
use crate::bounds::classical_fim;
use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, Vec3};

pub const CONSTRAINT_TOLERANCE: f64 = 1e-10;
/// Probabilities below this are clamped to zero before renormalizing.
pub const PROBABILITY_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PovmElement {
    pub w: f64,
    pub theta: f64,
    pub phi: f64,
}

impl PovmElement {
    pub fn new(w: f64, theta: f64, phi: f64) -> Self {
        PovmElement { w, theta, phi }
    }

    /// Element with weight `w` pointing along the (not necessarily unit) vector `m`.
    pub fn from_direction(w: f64, m: &Vec3) -> Self {
        let m = m.normalize();
        PovmElement {
            w,
            theta: m.z.clamp(-1.0, 1.0).acos(),
            phi: m.y.atan2(m.x),
        }
    }

    pub fn direction(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    /// The unnormalized vector `|e_i⟩`.
    pub fn vector(&self) -> [Complex64; 2] {
        let r = self.w.max(0.0).sqrt();
        let (s, c) = (0.5 * self.theta).sin_cos();
        [
            Complex64::new(r * c, 0.0),
            Complex64::from_polar(r * s, self.phi),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Povm {
    pub elements: Vec<PovmElement>,
}

impl Povm {
    pub fn new(elements: Vec<PovmElement>) -> Self {
        Povm { elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Checks positivity, the weight sum and the Bloch-vector completeness condition.
    pub fn validate(self) -> Result<Povm> {
        for (index, e) in self.elements.iter().enumerate() {
            if !(e.w >= 0.0) || !e.theta.is_finite() || !e.phi.is_finite() {
                return Err(Error::NegativeWeight { index, weight: e.w });
            }
        }
        let sum: f64 = self.elements.iter().map(|e| e.w).sum();
        if (sum - 2.0).abs() > CONSTRAINT_TOLERANCE {
            return Err(Error::WeightSumViolation { sum });
        }
        let residual = self.bloch_moment().norm();
        if residual > CONSTRAINT_TOLERANCE {
            return Err(Error::CompletenessViolation { residual });
        }
        Ok(self)
    }

    /// Two parameters cannot be estimated from fewer than three outcomes.
    pub fn require_estimation_capable(&self) -> Result<()> {
        if self.len() < 3 {
            return Err(Error::TooFewElements { count: self.len() });
        }
        Ok(())
    }

    /// `Σ w_i m_i`.
    pub fn bloch_moment(&self) -> Vec3 {
        self.elements
            .iter()
            .fold(Vec3::zeros(), |acc, e| acc + e.direction() * e.w)
    }

    /// `Σ |e_i⟩⟨e_i|` as a dense matrix.
    pub fn operator_sum(&self) -> [[Complex64; 2]; 2] {
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for e in &self.elements {
            let v = e.vector();
            for (r, row) in m.iter_mut().enumerate() {
                for (c, entry) in row.iter_mut().enumerate() {
                    *entry += v[r] * v[c].conj();
                }
            }
        }
        m
    }

    /// Born-rule probabilities `⟨ψ|Π_i|ψ⟩`, floored and renormalized.
    pub fn outcome_probabilities(&self, state: &PureQubitState) -> Vec<f64> {
        let raw = self
            .elements
            .iter()
            .map(|e| {
                let v = e.vector();
                (v[0].conj() * state.amplitudes[0] + v[1].conj() * state.amplitudes[1]).norm_sqr()
            })
            .collect();
        floor_and_normalize(raw)
    }

    /// Probabilities `w_i (1 + m_i·r)/2` for a state with Bloch vector `r`, `|r| ≤ 1`.
    pub fn probabilities_for_bloch(&self, r: &Vec3) -> Vec<f64> {
        let raw = self
            .elements
            .iter()
            .map(|e| 0.5 * e.w * (1.0 + e.direction().dot(r)))
            .collect();
        floor_and_normalize(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("POVM serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Povm> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Elements sorted by `(θ, φ, w)`; outcome labels carry no meaning.
    pub fn canonical(&self) -> Povm {
        let mut elements = self.elements.clone();
        elements.sort_by(|a, b| {
            a.theta
                .total_cmp(&b.theta)
                .then(a.phi.total_cmp(&b.phi))
                .then(a.w.total_cmp(&b.w))
        });
        Povm { elements }
    }
}

fn floor_and_normalize(mut p: Vec<f64>) -> Vec<f64> {
    for x in p.iter_mut() {
        if *x < PROBABILITY_FLOOR {
            *x = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        for x in p.iter_mut() {
            *x /= total;
        }
    }
    p
}

/// Symmetric three-outcome POVM in the x–z great circle.
pub fn trine_povm() -> Povm {
    let w = 2.0 / 3.0;
    Povm::new(vec![
        PovmElement::new(w, 0.0, 0.0),
        PovmElement::new(w, 2.0 * PI / 3.0, 0.0),
        PovmElement::new(w, -2.0 * PI / 3.0, 0.0),
    ])
}

/// Qubit SIC-POVM with Bloch directions on a regular tetrahedron.
pub fn sic_povm() -> Povm {
    let s = 1.0 / 3f64.sqrt();
    let dirs = [
        Vector3::new(s, s, s),
        Vector3::new(s, -s, -s),
        Vector3::new(-s, s, -s),
        Vector3::new(-s, -s, s),
    ];
    Povm::new(dirs.iter().map(|m| PovmElement::from_direction(0.5, m)).collect())
}

/// Two-outcome projective measurement along `axis`.
pub fn projective_povm(axis: &Vec3) -> Povm {
    Povm::new(vec![
        PovmElement::from_direction(1.0, axis),
        PovmElement::from_direction(1.0, &(-axis)),
    ])
}

/// Three orthonormal vectors in `span{|0⟩, |−1⟩, |+1⟩}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaimarkFrame {
    pub vectors: [[Complex64; 3]; 3],
}

impl NaimarkFrame {
    /// `G_ij = ⟨u_i|u_j⟩`.
    pub fn gram(&self) -> [[Complex64; 3]; 3] {
        let mut g = [[Complex64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = (0..3)
                    .map(|c| self.vectors[i][c].conj() * self.vectors[j][c])
                    .sum();
            }
        }
        g
    }

    /// Projective-measurement statistics `|⟨u_i|ψ ⊕ 0⟩|²`.
    pub fn probabilities(&self, state: &PureQubitState) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|u| (u[0].conj() * state.amplitudes[0] + u[1].conj() * state.amplitudes[1]).norm_sqr())
            .collect()
    }
}

/// Completes a three-element rank-one POVM to a projective measurement on a qutrit.
///
/// The 2×3 block `A_{ri} = ⟨r|e_i⟩` has orthonormal rows; the third row is the
/// unit vector orthogonal to both, phase-fixed so its first nonzero entry is
/// real and positive.
pub fn naimark_dilation(povm: &Povm) -> Result<NaimarkFrame> {
    if povm.len() != 3 {
        return Err(Error::DilationFailure(format!(
            "need exactly 3 elements, got {}",
            povm.len()
        )));
    }
    let e: Vec<[Complex64; 2]> = povm.elements.iter().map(|el| el.vector()).collect();
    let row0 = [e[0][0], e[1][0], e[2][0]];
    let row1 = [e[0][1], e[1][1], e[2][1]];
    let cross = [
        row0[1] * row1[2] - row0[2] * row1[1],
        row0[2] * row1[0] - row0[0] * row1[2],
        row0[0] * row1[1] - row0[1] * row1[0],
    ];
    let mut row2 = cross.map(|c| c.conj());
    let norm = row2.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::DilationFailure(format!(
            "element block is not an isometry (completion norm {norm})"
        )));
    }
    if let Some(lead) = row2.iter().copied().find(|c| c.norm() > 1e-12) {
        let phase = lead.conj() / lead.norm();
        for c in row2.iter_mut() {
            *c *= phase;
        }
    }
    let vectors = [0, 1, 2].map(|i| [row0[i], row1[i], row2[i]]);
    Ok(NaimarkFrame { vectors })
}

/// Rank of the classical Fisher matrix of a two-outcome projective measurement along `axis`.
pub fn projective_fim_rank(point: &BlochPoint, axis: &Vec3) -> Result<usize> {
    let fim = classical_fim(&projective_povm(axis), point)?;
    let scale = fim.matrix.trace().abs().max(1.0);
    Ok(sym_eigenvalues(&fim.matrix)
        .iter()
        .filter(|&&l| l > 1e-9 * scale)
        .count())
}
