//! Small dense complex linear algebra helpers shared by the group and preimage code.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const SCHUR_MAX_ITER: usize = 10_000;

/// `max |(M M^*) - I|` over all entries.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let prod = m * m.adjoint();
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn diag(values: &[Complex64]) -> CMatrix {
    let n = values.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, v) in values.iter().enumerate() {
        m[(i, i)] = *v;
    }
    m
}

pub fn trace(m: &CMatrix) -> Complex64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Complex Schur form `M = Q T Q^*`. For a normal matrix `T` is diagonal up to
/// rounding, so `(diag T, Q)` is an eigendecomposition.
pub fn normal_eigen(m: &CMatrix) -> Result<(Vec<Complex64>, CMatrix)> {
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::EigenSolver)?;
    let (q, t) = schur.unpack();
    let values = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    Ok((values, q))
}

/// Rescale `v` so that its largest-modulus entry is real and positive.
pub fn normalize_phase(v: &mut [Complex64]) {
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if pivot.norm() == 0.0 {
        return;
    }
    let phase = pivot.conj() / pivot.norm();
    for x in v.iter_mut() {
        *x *= phase;
    }
}

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = x.rem_euclid(tau);
    if w >= tau {
        0.0
    } else {
        w
    }
}

/// Distance between two angles on the circle.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(std::f64::consts::TAU - d)
}

/// Neumaier-compensated sum; error independent of the number of terms to
/// first order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + carry
}
