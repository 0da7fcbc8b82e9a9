//! The massive Dirac (Chern insulator) Bloch model and the geometry of its upper band.
//!
//! `H(k) = d(k)·σ`, `d = (sin k1, sin k2, M − cos k1 − cos k2)`, on the torus
//! `k ∈ [−π, π)²`. The basis is `{|0⟩, |−1⟩}` with `σ3|0⟩ = +|0⟩`.

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{wrap_angle, Mat2, Vec3};

/// Below this `|d|` the unit vector `n` is considered undefined.
pub const GAP_TOLERANCE: f64 = 1e-12;
/// Masses closer than this to a gap closing are rejected by BZ integrals.
pub const CRITICAL_MASS_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_GRID_N: usize = 64;
pub const MIN_GRID_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochPoint {
    pub k1: f64,
    pub k2: f64,
    pub mass: f64,
}

impl BlochPoint {
    /// Builds a point with both momenta wrapped into `[-π, π)`.
    pub fn new(k1: f64, k2: f64, mass: f64) -> Self {
        BlochPoint {
            k1: wrap_angle(k1),
            k2: wrap_angle(k2),
            mass,
        }
    }

    pub fn shifted(&self, dk1: f64, dk2: f64) -> Self {
        BlochPoint::new(self.k1 + dk1, self.k2 + dk2, self.mass)
    }

    pub fn k(&self) -> [f64; 2] {
        [self.k1, self.k2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub d: Vec3,
    pub n: Vec3,
    /// Band gap `2|d|`.
    pub gap: f64,
}

/// Raw `d(k)`, defined everywhere.
pub fn d_vector(p: &BlochPoint) -> Vec3 {
    Vector3::new(p.k1.sin(), p.k2.sin(), p.mass - p.k1.cos() - p.k2.cos())
}

pub fn bloch_vector(p: &BlochPoint) -> Result<BlochVector> {
    let d = d_vector(p);
    let norm = d.norm();
    if norm < GAP_TOLERANCE {
        return Err(Error::GaplessPoint {
            k1: p.k1,
            k2: p.k2,
            mass: p.mass,
            gap: norm,
        });
    }
    Ok(BlochVector {
        d,
        n: d / norm,
        gap: 2.0 * norm,
    })
}

/// `n(k)` together with its first and second momentum derivatives.
#[derive(Debug, Clone, Copy)]
pub struct BlochJet {
    pub n: Vec3,
    pub dn: [Vec3; 2],
    pub d2n: [[Vec3; 2]; 2],
    pub gap: f64,
}

pub fn bloch_jet(p: &BlochPoint) -> Result<BlochJet> {
    let bv = bloch_vector(p)?;
    let d = bv.d;
    let r = d.norm();
    let (s1, c1) = p.k1.sin_cos();
    let (s2, c2) = p.k2.sin_cos();
    let dd = [Vector3::new(c1, 0.0, s1), Vector3::new(0.0, c2, s2)];
    // ∂1∂2 d vanishes; only the diagonal second derivatives survive.
    let d2d = [
        [Vector3::new(-s1, 0.0, c1), Vec3::zeros()],
        [Vec3::zeros(), Vector3::new(0.0, -s2, c2)],
    ];
    let r3 = r * r * r;
    let r5 = r3 * r * r;
    let s = [d.dot(&dd[0]), d.dot(&dd[1])];
    let dn = [
        dd[0] / r - d * (s[0] / r3),
        dd[1] / r - d * (s[1] / r3),
    ];
    let mut d2n = [[Vec3::zeros(); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let ds = dd[a].dot(&dd[b]) + d.dot(&d2d[a][b]);
            d2n[a][b] = d2d[a][b] / r - dd[a] * (s[b] / r3) - dd[b] * (s[a] / r3)
                - d * (ds / r3 - 3.0 * s[a] * s[b] / r5);
        }
    }
    Ok(BlochJet {
        n: bv.n,
        dn,
        d2n,
        gap: bv.gap,
    })
}

/// Normalized qubit state over `{|0⟩, |−1⟩}` in the canonical gauge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureQubitState {
    pub amplitudes: [Complex64; 2],
}

impl PureQubitState {
    /// Normalizes and applies the gauge: first nonzero amplitude real and non-negative.
    pub fn new(a0: Complex64, a1: Complex64) -> Self {
        let norm = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
        let (a0, a1) = (a0 / norm, a1 / norm);
        let zero = Complex64::new(0.0, 0.0);
        let amplitudes = if a0 != zero {
            let phase = a0.conj() / a0.norm();
            [Complex64::new(a0.norm(), 0.0), a1 * phase]
        } else {
            [zero, Complex64::new(a1.norm(), 0.0)]
        };
        PureQubitState { amplitudes }
    }

    /// The state whose Bloch vector is the unit vector `n`.
    pub fn from_bloch(n: &Vec3) -> Self {
        let (a0, a1) = if n.z >= 0.0 {
            let s = (2.0 * (1.0 + n.z)).sqrt();
            (Complex64::new((1.0 + n.z) / s, 0.0), Complex64::new(n.x, n.y) / s)
        } else {
            let s = (2.0 * (1.0 - n.z)).sqrt();
            (Complex64::new(n.x, -n.y) / s, Complex64::new((1.0 - n.z) / s, 0.0))
        };
        PureQubitState::new(a0, a1)
    }

    pub fn bloch(&self) -> Vec3 {
        let [a0, a1] = self.amplitudes;
        let c = a0.conj() * a1;
        Vector3::new(2.0 * c.re, 2.0 * c.im, a0.norm_sqr() - a1.norm_sqr())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureQubitState) -> Complex64 {
        self.amplitudes[0].conj() * other.amplitudes[0]
            + self.amplitudes[1].conj() * other.amplitudes[1]
    }

    pub fn norm(&self) -> f64 {
        (self.amplitudes[0].norm_sqr() + self.amplitudes[1].norm_sqr()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Upper,
    Lower,
}

/// Eigenstate of `d·σ` with eigenvalue `+|d|`.
pub fn excited_state(p: &BlochPoint) -> Result<PureQubitState> {
    band_state(p, Band::Upper)
}

pub fn band_state(p: &BlochPoint, band: Band) -> Result<PureQubitState> {
    let bv = bloch_vector(p)?;
    Ok(match band {
        Band::Upper => PureQubitState::from_bloch(&bv.n),
        Band::Lower => PureQubitState::from_bloch(&(-bv.n)),
    })
}

/// Quantum metric and Berry curvature at one momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricTensor {
    pub g: Mat2,
    pub omega12: f64,
}

impl GeometricTensor {
    pub fn det_g(&self) -> f64 {
        self.g.determinant()
    }

    /// `√det g`, clamped at zero.
    pub fn volume_density(&self) -> f64 {
        self.det_g().max(0.0).sqrt()
    }

    fn from_jet(jet: &BlochJet) -> Self {
        let [n1, n2] = jet.dn;
        let off = 0.25 * n1.dot(&n2);
        let g = Matrix2::new(0.25 * n1.dot(&n1), off, off, 0.25 * n2.dot(&n2));
        // −2 Im⟨∂1ψ|∂2ψ⟩ for the state aligned with n equals −½ n·(∂1n × ∂2n)
        let omega12 = -0.5 * jet.n.dot(&n1.cross(&n2));
        GeometricTensor { g, omega12 }
    }
}

/// Closed-form quantum geometric tensor of the upper band.
pub fn qgt_analytic(p: &BlochPoint) -> Result<GeometricTensor> {
    Ok(GeometricTensor::from_jet(&bloch_jet(p)?))
}

/// Quantum geometric tensor from state overlaps at neighbouring momenta.
///
/// The metric comes from symmetric second differences of the fidelity
/// `|⟨ψ(k)|ψ(k+δv)⟩|²` along `e1`, `e2` and `e1 ± e2`; the curvature from the
/// phase of the gauge-invariant product of overlaps around a plaquette of side
/// `δ` centred on `k`. Both are accurate to `O(δ²)`.
pub fn qgt_fidelity(p: &BlochPoint, delta: f64) -> Result<GeometricTensor> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidStep(delta));
    }
    let centre = bloch_vector(p)?;
    if centre.gap <= 10.0 * delta {
        return Err(Error::InvalidStep(delta));
    }
    let psi = excited_state(p)?;
    let state_at = |dk1: f64, dk2: f64| excited_state(&p.shifted(dk1, dk2));
    let infidelity = |v1: f64, v2: f64| -> Result<f64> {
        let plus = psi.inner(&state_at(delta * v1, delta * v2)?).norm_sqr();
        let minus = psi.inner(&state_at(-delta * v1, -delta * v2)?).norm_sqr();
        Ok((2.0 - plus - minus) / (2.0 * delta * delta))
    };
    let g11 = infidelity(1.0, 0.0)?;
    let g22 = infidelity(0.0, 1.0)?;
    let diag_plus = infidelity(1.0, 1.0)?;
    let diag_minus = infidelity(1.0, -1.0)?;
    // average of (G(+) − g11 − g22)/2 and (g11 + g22 − G(−))/2
    let g12 = 0.25 * (diag_plus - diag_minus);

    let h = 0.5 * delta;
    let corners = [
        state_at(-h, -h)?,
        state_at(h, -h)?,
        state_at(h, h)?,
        state_at(-h, h)?,
    ];
    let mut loop_product = Complex64::new(1.0, 0.0);
    for i in 0..4 {
        loop_product *= corners[i].inner(&corners[(i + 1) % 4]);
    }
    let phase = loop_product.arg();
    if phase.abs() > PI / 2.0 {
        return Err(Error::StepTooLarge { phase });
    }
    Ok(GeometricTensor {
        g: Matrix2::new(g11, g12, g12, g22),
        omega12: -phase / (delta * delta),
    })
}

fn check_mass_and_grid(mass: f64, grid_n: usize) -> Result<()> {
    if grid_n < MIN_GRID_N {
        return Err(Error::GridTooSmall {
            min: MIN_GRID_N,
            got: grid_n,
        });
    }
    if !mass.is_finite() || [0.0, 2.0, -2.0].iter().any(|c| (mass - c).abs() < CRITICAL_MASS_TOLERANCE) {
        return Err(Error::CriticalMass(mass));
    }
    Ok(())
}

/// Midpoint grid coordinate `−π + (i + ½)·2π/n`.
pub fn grid_coordinate(i: usize, grid_n: usize) -> f64 {
    -PI + (i as f64 + 0.5) * 2.0 * PI / grid_n as f64
}

/// Sums `f` over the midpoint grid, reducing rows in index order.
pub(crate) fn grid_sum<F>(grid_n: usize, f: F) -> Result<f64>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    let rows: Vec<Result<f64>> = (0..grid_n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..grid_n {
                acc += f(i, j)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total)
}

/// Lattice field-strength sum over the Brillouin zone, before rounding.
pub fn chern_sum(mass: f64, grid_n: usize) -> Result<f64> {
    check_mass_and_grid(mass, grid_n)?;
    let states: Vec<Vec<PureQubitState>> = (0..grid_n)
        .map(|i| {
            (0..grid_n)
                .map(|j| {
                    excited_state(&BlochPoint::new(
                        grid_coordinate(i, grid_n),
                        grid_coordinate(j, grid_n),
                        mass,
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let flux = grid_sum(grid_n, |i, j| {
        let ip = (i + 1) % grid_n;
        let jp = (j + 1) % grid_n;
        let u = states[i][j].inner(&states[ip][j])
            * states[ip][j].inner(&states[ip][jp])
            * states[ip][jp].inner(&states[i][jp])
            * states[i][jp].inner(&states[i][j]);
        Ok(-u.arg())
    })?;
    Ok(flux / (2.0 * PI))
}

/// First Chern number of the upper band.
pub fn chern_number(mass: f64, grid_n: usize) -> Result<i64> {
    let value = chern_sum(mass, grid_n)?;
    let rounded = value.round();
    let residual = (value - rounded).abs();
    if residual > 1e-3 {
        return Err(Error::NonQuantized { value, residual });
    }
    Ok(rounded as i64)
}

/// Midpoint Riemann sum of `∫ √det g d²k` over the Brillouin zone.
pub fn quantum_volume(mass: f64, grid_n: usize) -> Result<f64> {
    check_mass_and_grid(mass, grid_n)?;
    let h = 2.0 * PI / grid_n as f64;
    let sum = grid_sum(grid_n, |i, j| {
        let p = BlochPoint::new(grid_coordinate(i, grid_n), grid_coordinate(j, grid_n), mass);
        Ok(qgt_analytic(&p)?.volume_density())
    })?;
    Ok(sum * h * h)
}

/// Smallest and largest Berry curvature on the midpoint grid.
pub fn curvature_range(mass: f64, grid_n: usize) -> Result<(f64, f64)> {
    check_mass_and_grid(mass, grid_n)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..grid_n {
        for j in 0..grid_n {
            let p = BlochPoint::new(grid_coordinate(i, grid_n), grid_coordinate(j, grid_n), mass);
            let w = qgt_analytic(&p)?.omega12;
            lo = lo.min(w);
            hi = hi.max(w);
        }
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn bloch_vector_examples() {
        let err = bloch_vector(&BlochPoint::new(0.0, 0.0, 2.0)).unwrap_err();
        assert!(matches!(err, Error::GaplessPoint { .. }));

        let bv = bloch_vector(&BlochPoint::new(FRAC_PI_2, FRAC_PI_2, 1.0)).unwrap();
        assert!((bv.d - Vector3::new(1.0, 1.0, 1.0)).norm() < 1e-15);
        let s = 1.0 / 3f64.sqrt();
        assert!((bv.n - Vector3::new(s, s, s)).norm() < 1e-15);
        assert!(close(bv.gap, 2.0 * 3f64.sqrt(), 1e-14));

        let bv = bloch_vector(&BlochPoint::new(PI, 0.0, 1.0)).unwrap();
        assert!((bv.d - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn point_wraps_into_torus() {
        let p = BlochPoint::new(PI, 3.0 * PI, 1.0);
        assert_eq!(p.k1, -PI);
        assert!(close(p.k2, -PI, 1e-15));
        let q = BlochPoint::new(-4.0, 7.0, 1.0);
        assert!((-PI..PI).contains(&q.k1) && (-PI..PI).contains(&q.k2));
    }

    #[test]
    fn excited_state_examples() {
        let s = PureQubitState::from_bloch(&Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(s.amplitudes[0], Complex64::new(1.0, 0.0));
        assert_eq!(s.amplitudes[1], Complex64::new(0.0, 0.0));

        let s = PureQubitState::from_bloch(&Vector3::new(1.0, 0.0, 0.0));
        let r = 0.5f64.sqrt();
        assert!((s.amplitudes[0] - r).norm() < 1e-15);
        assert!((s.amplitudes[1] - r).norm() < 1e-15);

        let s = PureQubitState::from_bloch(&Vector3::new(0.0, 0.0, -1.0));
        assert_eq!(s.amplitudes[0], Complex64::new(0.0, 0.0));
        assert_eq!(s.amplitudes[1], Complex64::new(1.0, 0.0));

        // d = (0,0,1) at k = (π, 0), M = 1
        let s = excited_state(&BlochPoint::new(PI, 0.0, 1.0)).unwrap();
        assert!((s.amplitudes[0] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn excited_state_is_upper_eigenvector() {
        for &(k1, k2, m) in &[(0.3, -1.2, 1.0), (2.9, 0.1, -1.5), (-3.0, -3.0, 2.5), (0.0, 0.0, 1.0)] {
            let p = BlochPoint::new(k1, k2, m);
            let bv = bloch_vector(&p).unwrap();
            let s = excited_state(&p).unwrap();
            assert!(close(s.norm(), 1.0, 1e-12));
            assert!((s.bloch() - bv.n).norm() < 1e-10);
            let [a0, a1] = s.amplitudes;
            // (d·σ) ψ = |d| ψ
            let d = bv.d;
            let h0 = a0 * d.z + a1 * Complex64::new(d.x, -d.y);
            let h1 = a0 * Complex64::new(d.x, d.y) - a1 * d.z;
            let r = d.norm();
            assert!((h0 - a0 * r).norm() < 1e-12 && (h1 - a1 * r).norm() < 1e-12);
            // gauge
            if a0.norm() > 0.0 {
                assert!(a0.im == 0.0 && a0.re >= 0.0);
            }
            let lower = band_state(&p, Band::Lower).unwrap();
            assert!(lower.inner(&s).norm() < 1e-12);
        }
    }

    #[test]
    fn gauge_is_deterministic_under_global_phase() {
        let s = PureQubitState::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
        let phase = Complex64::from_polar(1.0, 1.234);
        let t = PureQubitState::new(s.amplitudes[0] * phase, s.amplitudes[1] * phase);
        assert!((s.amplitudes[0] - t.amplitudes[0]).norm() < 1e-15);
        assert!((s.amplitudes[1] - t.amplitudes[1]).norm() < 1e-15);
        assert_eq!(t.amplitudes[0].im, 0.0);
    }

    #[test]
    fn jet_matches_finite_differences() {
        let p = BlochPoint::new(0.7, -1.1, 1.3);
        let jet = bloch_jet(&p).unwrap();
        let h = 1e-5;
        let n_at = |a: f64, b: f64| bloch_vector(&p.shifted(a, b)).unwrap().n;
        let fd1 = (n_at(h, 0.0) - n_at(-h, 0.0)) / (2.0 * h);
        let fd2 = (n_at(0.0, h) - n_at(0.0, -h)) / (2.0 * h);
        assert!((fd1 - jet.dn[0]).norm() < 1e-9);
        assert!((fd2 - jet.dn[1]).norm() < 1e-9);
        let dn_at = |a: f64, b: f64| bloch_jet(&p.shifted(a, b)).unwrap().dn;
        for b in 0..2 {
            let (e1, e2) = if b == 0 { (h, 0.0) } else { (0.0, h) };
            for a in 0..2 {
                let fd = (dn_at(e1, e2)[a] - dn_at(-e1, -e2)[a]) / (2.0 * h);
                assert!((fd - jet.d2n[a][b]).norm() < 1e-8, "d2n[{a}][{b}]");
            }
        }
    }

    /// Independent oracle: −2 Im⟨∂1ψ|∂2ψ⟩ and Re⟨∂aψ|(1−P)|∂bψ⟩ by central differences of states.
    fn fd_qgt(p: &BlochPoint, band: Band, h: f64) -> (Mat2, f64) {
        let psi = band_state(p, band).unwrap();
        let st = |a: f64, b: f64| band_state(&p.shifted(a, b), band).unwrap();
        let diff = |a: &PureQubitState, b: &PureQubitState| {
            [
                (a.amplitudes[0] - b.amplitudes[0]) / (2.0 * h),
                (a.amplitudes[1] - b.amplitudes[1]) / (2.0 * h),
            ]
        };
        let d1 = diff(&st(h, 0.0), &st(-h, 0.0));
        let d2 = diff(&st(0.0, h), &st(0.0, -h));
        let ip = |x: &[Complex64; 2], y: &[Complex64; 2]| x[0].conj() * y[0] + x[1].conj() * y[1];
        let a = psi.amplitudes;
        let q = |x: &[Complex64; 2], y: &[Complex64; 2]| ip(x, y) - ip(x, &a) * ip(&a, y);
        let g = Matrix2::new(q(&d1, &d1).re, q(&d1, &d2).re, q(&d2, &d1).re, q(&d2, &d2).re);
        (g, -2.0 * ip(&d1, &d2).im)
    }

    #[test]
    fn analytic_qgt_matches_finite_difference_oracle() {
        let p = BlochPoint::new(FRAC_PI_2, FRAC_PI_2, 1.0);
        let qgt = qgt_analytic(&p).unwrap();
        let (g, omega) = fd_qgt(&p, Band::Upper, 1e-4);
        assert!((qgt.g - g).abs().max() < 1e-6);
        assert!(close(qgt.omega12, omega, 1e-6));
    }

    #[test]
    fn lower_band_curvature_is_opposite() {
        for &(k1, k2, m) in &[(1.0, 0.5, 1.0), (-2.0, 0.4, -1.5), (0.3, 2.2, 2.5)] {
            let p = BlochPoint::new(k1, k2, m);
            let (_, upper) = fd_qgt(&p, Band::Upper, 1e-4);
            let (_, lower) = fd_qgt(&p, Band::Lower, 1e-4);
            let analytic = qgt_analytic(&p).unwrap().omega12;
            assert!(close(upper, analytic, 1e-6));
            assert!(close(lower, -analytic, 1e-6));
        }
    }

    #[test]
    fn det_identity_holds() {
        let qgt = qgt_analytic(&BlochPoint::new(1.0, 0.5, 1.0)).unwrap();
        assert!(close(qgt.volume_density(), qgt.omega12.abs() / 2.0, 1e-12));
        assert!((qgt.g - qgt.g.transpose()).norm() == 0.0);
    }

    #[test]
    fn degenerate_pullback_has_zero_curvature() {
        // at M = 1 the curvature density is proportional to M c1 c2 − c1 − c2, zero at c1 = c2 = 0
        let qgt = qgt_analytic(&BlochPoint::new(FRAC_PI_2, FRAC_PI_2 + PI, 1.0)).unwrap();
        let p = BlochPoint::new(FRAC_PI_2, -FRAC_PI_2, 1.0);
        let q = qgt_analytic(&p).unwrap();
        assert!(q.omega12.abs() < 1e-15 && q.det_g().abs() < 1e-15);
        assert!(qgt.omega12.abs() < 1e-15);
    }

    #[test]
    fn fidelity_qgt_converges() {
        let p = BlochPoint::new(1.0, 0.5, 1.0);
        let exact = qgt_analytic(&p).unwrap();
        let fid = qgt_fidelity(&p, 1e-3).unwrap();
        assert_eq!(fid.g[(0, 1)], fid.g[(1, 0)]);
        assert!((fid.g - exact.g).abs().max() < 1e-4);
        assert!(close(fid.omega12, exact.omega12, 1e-4));

        let e1 = (qgt_fidelity(&p, 1e-2).unwrap().g - exact.g).norm();
        let e2 = (qgt_fidelity(&p, 5e-3).unwrap().g - exact.g).norm();
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn fidelity_qgt_rejects_bad_steps() {
        let p = BlochPoint::new(1.0, 0.5, 1.0);
        assert!(matches!(qgt_fidelity(&p, 0.0), Err(Error::InvalidStep(_))));
        assert!(matches!(qgt_fidelity(&p, 10.0), Err(Error::InvalidStep(_))));
        assert!(matches!(
            qgt_fidelity(&BlochPoint::new(0.0, 0.0, 2.0), 1e-3),
            Err(Error::GaplessPoint { .. })
        ));
    }

    #[test]
    fn chern_examples() {
        let c1 = chern_number(1.0, 32).unwrap();
        assert_eq!(c1.abs(), 1);
        assert_eq!(chern_number(2.5, 32).unwrap(), 0);
        assert_eq!(chern_number(-1.0, 32).unwrap(), -c1);
        assert_eq!(chern_number(10.0, 16).unwrap(), 0);
        assert!(matches!(chern_number(2.0, 32), Err(Error::CriticalMass(_))));
        assert!(matches!(chern_number(1e-7, 32), Err(Error::CriticalMass(_))));
        assert!(matches!(chern_number(1.0, 4), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn chern_sum_matches_curvature_integral() {
        // brute-force oracle: midpoint quadrature of the analytic curvature
        let n = 128;
        let h = 2.0 * PI / n as f64;
        let mut integral = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = BlochPoint::new(grid_coordinate(i, n), grid_coordinate(j, n), 1.0);
                integral += qgt_analytic(&p).unwrap().omega12;
            }
        }
        let brute = integral * h * h / (2.0 * PI);
        assert!(close(brute, chern_number(1.0, 32).unwrap() as f64, 1e-6));
    }

    #[test]
    fn quantum_volume_examples() {
        let v1 = quantum_volume(1.0, 64).unwrap();
        assert!(v1 >= PI);
        assert!(quantum_volume(10.0, 64).unwrap() < 0.2);
        assert!(matches!(quantum_volume(-2.0, 64), Err(Error::CriticalMass(_))));
        // the curvature changes sign at M = 1, so the bound is strict there
        let (lo, hi) = curvature_range(1.0, 64).unwrap();
        assert!(lo < 0.0 && hi > 0.0);
        assert!(v1 > 1.01 * PI);
    }
}
