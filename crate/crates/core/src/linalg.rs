//! Small dense helpers for the 2×2 and 3-vector algebra used throughout.

use nalgebra::{Matrix2, SymmetricEigen, Vector3};
use std::f64::consts::PI;

pub type Mat2 = Matrix2<f64>;
pub type Vec3 = Vector3<f64>;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Wraps an angle difference into `(-π, π]`.
pub fn wrap_difference(x: f64) -> f64 {
    let y = wrap_angle(x);
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Symmetrizes a nearly symmetric matrix.
pub fn symmetrize(m: &Mat2) -> Mat2 {
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    Mat2::new(m[(0, 0)], off, off, m[(1, 1)])
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym_eigenvalues(m: &Mat2) -> [f64; 2] {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    [mean - rad, mean + rad]
}

/// Principal square root of a symmetric positive semidefinite matrix.
pub fn sym_sqrt(m: &Mat2) -> Mat2 {
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    eig.eigenvectors * Mat2::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Trace norm (sum of singular values) of a real 2×2 matrix.
pub fn trace_norm(m: &Mat2) -> f64 {
    // σ1 + σ2 = sqrt(σ1² + σ2² + 2σ1σ2) = sqrt(‖m‖_F² + 2|det m|)
    (m.norm_squared() + 2.0 * m.determinant().abs()).sqrt()
}

pub fn is_positive_definite(m: &Mat2) -> bool {
    (m - m.transpose()).abs().max() <= 1e-10 * m.abs().max().max(1.0)
        && m.cholesky().is_some()
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖`.
pub fn relative_error(a: &Mat2, b: &Mat2) -> f64 {
    (a - b).norm() / b.norm()
}
