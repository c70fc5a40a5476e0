//! The three implemented matrix groups: descriptors, Haar sampling, the
//! maximal torus, eigenangles and the power map.
//!
//! Every group element is stored as a complex `N x N` matrix in the defining
//! representation. Elements of `SO(2k+1)` have exactly zero imaginary parts.
//!
//! Torus conventions:
//! - `U(N)`: diagonal matrices, coordinates are the `N` diagonal angles.
//! - `SU(N)`: diagonal matrices with the last entry fixed by `det = 1`,
//!   coordinates are the first `N - 1` diagonal angles.
//! - `SO(2k+1)`: block rotations `R(θ_1) ⊕ ... ⊕ R(θ_k) ⊕ 1` where block `j`
//!   acts on coordinates `(2j, 2j+1)` and `R(θ)` has eigenvalue `e^{iθ}` on the
//!   eigenvector `(1, -i)/√2`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Tolerance for unitarity and determinant checks on freshly built elements.
pub const TAU_UNIT: f64 = 1e-10;
/// Tolerance for unitarity after repeated multiplication.
pub const TAU_DRIFT: f64 = 1e-8;

const HAAR_MAX_ATTEMPTS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "U")]
    UnitaryN,
    #[serde(rename = "SU")]
    SpecialUnitaryN,
    #[serde(rename = "SO")]
    SpecialOrthogonalOdd,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::UnitaryN => "U",
            Family::SpecialUnitaryN => "SU",
            Family::SpecialOrthogonalOdd => "SO",
        })
    }
}

/// Static data of one group: torus rank, eigenvalue monomials, stationarity
/// exponent and Weyl group order. Cheap to clone.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupDescriptor {
    family: Family,
    matrix_size: usize,
    torus_rank: usize,
    /// Row `j` is the exponent vector of the Laurent monomial giving the
    /// `j`-th eigenvalue of a torus element.
    monomials: Arc<[Vec<i64>]>,
    stationarity_exponent: usize,
    weyl_order: u64,
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

impl GroupDescriptor {
    pub fn new(family: Family, matrix_size: usize) -> Result<Self> {
        let n = matrix_size;
        let unit = |j: usize, rank: usize, sign: i64| {
            let mut e = vec![0i64; rank];
            e[j] = sign;
            e
        };
        let (rank, monomials, exponent, weyl) = match family {
            Family::UnitaryN => {
                if n == 0 {
                    return Err(Error::InvalidDescriptor("U(N) needs N >= 1".into()));
                }
                let mons = (0..n).map(|j| unit(j, n, 1)).collect::<Vec<_>>();
                (n, mons, n, factorial(n))
            }
            Family::SpecialUnitaryN => {
                if n < 2 {
                    return Err(Error::InvalidDescriptor("SU(N) needs N >= 2".into()));
                }
                let rank = n - 1;
                let mut mons = (0..rank).map(|j| unit(j, rank, 1)).collect::<Vec<_>>();
                mons.push(vec![-1; rank]);
                // The Haar torus density of SU(N) has a nonzero coefficient at a
                // lattice point with gcd N, so powers freeze only from N + 1 on.
                (rank, mons, n + 1, factorial(n))
            }
            Family::SpecialOrthogonalOdd => {
                if n < 3 || n.is_multiple_of(2) {
                    return Err(Error::InvalidDescriptor("SO(N) is implemented for odd N >= 3".into()));
                }
                let k = (n - 1) / 2;
                let mut mons = Vec::with_capacity(n);
                for j in 0..k {
                    mons.push(unit(j, k, 1));
                    mons.push(unit(j, k, -1));
                }
                mons.push(vec![0; k]);
                (k, mons, n, (1u64 << k) * factorial(k))
            }
        };
        Ok(Self {
            family,
            matrix_size: n,
            torus_rank: rank,
            monomials: monomials.into(),
            stationarity_exponent: exponent,
            weyl_order: weyl,
        })
    }

    pub fn unitary(n: usize) -> Result<Self> {
        Self::new(Family::UnitaryN, n)
    }

    pub fn special_unitary(n: usize) -> Result<Self> {
        Self::new(Family::SpecialUnitaryN, n)
    }

    pub fn special_orthogonal(n: usize) -> Result<Self> {
        Self::new(Family::SpecialOrthogonalOdd, n)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn matrix_size(&self) -> usize {
        self.matrix_size
    }

    pub fn torus_rank(&self) -> usize {
        self.torus_rank
    }

    pub fn monomials(&self) -> &[Vec<i64>] {
        &self.monomials
    }

    /// Power from which the Haar eigenvalue law is frozen.
    pub fn stationarity_exponent(&self) -> usize {
        self.stationarity_exponent
    }

    pub fn weyl_order(&self) -> u64 {
        self.weyl_order
    }

    pub fn name(&self) -> String {
        format!("{}({})", self.family, self.matrix_size)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement {
            descriptor: self.clone(),
            matrix: CMatrix::identity(self.matrix_size, self.matrix_size),
        }
    }
}

/// A point of the maximal torus in angle coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    angles: Vec<f64>,
}

impl TorusPoint {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if let Some(bad) = angles.iter().find(|a| !(0.0..TAU).contains(*a)) {
            return Err(Error::InvalidInput(format!("angle {bad} outside [0, 2π)")));
        }
        Ok(Self { angles })
    }

    /// Builds a point from arbitrary real angles, reducing each mod 2π.
    pub fn wrapped(angles: impl IntoIterator<Item = f64>) -> Self {
        Self {
            angles: angles.into_iter().map(linalg::wrap_angle).collect(),
        }
    }

    pub fn uniform<R: Rng + ?Sized>(rank: usize, rng: &mut R) -> Self {
        Self::wrapped((0..rank).map(|_| rng.random::<f64>() * TAU))
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn rank(&self) -> usize {
        self.angles.len()
    }

    /// Entrywise `m·θ mod 2π`.
    pub fn power(&self, m: u64) -> Self {
        Self::wrapped(self.angles.iter().map(|a| scaled_angle(*a, m)))
    }
}

/// `m·θ mod 2π`.
pub(crate) fn scaled_angle(theta: f64, m: u64) -> f64 {
    linalg::wrap_angle(theta * m as f64)
}

/// An element of one of the implemented groups.
#[derive(Clone, Debug)]
pub struct GroupElement {
    descriptor: GroupDescriptor,
    matrix: CMatrix,
}

impl GroupElement {
    /// Validates unitarity, the determinant constraint and, for `SO`, realness.
    pub fn new(descriptor: &GroupDescriptor, matrix: CMatrix) -> Result<Self> {
        let n = descriptor.matrix_size();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "expected {n}x{n} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = linalg::unitarity_defect(&matrix);
        if defect > TAU_UNIT {
            return Err(Error::InvalidInput(format!("unitarity defect {defect:e}")));
        }
        if descriptor.family() != Family::UnitaryN {
            let det = matrix.determinant();
            if (det - Complex64::new(1.0, 0.0)).norm() > TAU_UNIT {
                return Err(Error::InvalidInput(format!("determinant {det} is not 1")));
            }
        }
        if descriptor.family() == Family::SpecialOrthogonalOdd && matrix.iter().any(|z| z.im.abs() > TAU_UNIT) {
            return Err(Error::InvalidInput("SO element has complex entries".into()));
        }
        Ok(Self::from_parts(descriptor, matrix))
    }

    pub(crate) fn from_parts(descriptor: &GroupDescriptor, matrix: CMatrix) -> Self {
        Self {
            descriptor: descriptor.clone(),
            matrix,
        }
    }

    pub fn descriptor(&self) -> &GroupDescriptor {
        &self.descriptor
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.matrix)
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.matrix)
    }

    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        Self::from_parts(&self.descriptor, &self.matrix * &other.matrix)
    }

    pub fn inverse(&self) -> GroupElement {
        Self::from_parts(&self.descriptor, self.matrix.adjoint())
    }

    /// `g · self · g⁻¹`.
    pub fn conjugate_by(&self, g: &GroupElement) -> GroupElement {
        Self::from_parts(&self.descriptor, &g.matrix * &self.matrix * g.matrix.adjoint())
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(n: usize, real: bool, rng: &mut R) -> CMatrix {
    let scale = if real { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = if real { 0.0 } else { rng.sample(StandardNormal) };
        Complex64::new(re * scale, im * scale)
    })
}

/// QR of a Gaussian matrix with the phases of `diag R` moved into `Q`.
fn haar_unitary_or_orthogonal<R: Rng + ?Sized>(n: usize, real: bool, rng: &mut R) -> Result<CMatrix> {
    for _ in 0..HAAR_MAX_ATTEMPTS {
        let qr = gaussian_matrix(n, real, rng).qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)].norm() < 1e-12) {
            continue;
        }
        let mut q = qr.q();
        for j in 0..n {
            let d = r[(j, j)];
            let phase = d / d.norm();
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
        if real {
            for z in q.iter_mut() {
                z.im = 0.0;
            }
        }
        return Ok(q);
    }
    Err(Error::SamplingFailed {
        attempts: HAAR_MAX_ATTEMPTS,
    })
}

/// Draws a Haar-distributed element of the group.
pub fn haar_sample<R: Rng + ?Sized>(descriptor: &GroupDescriptor, rng: &mut R) -> Result<GroupElement> {
    let n = descriptor.matrix_size();
    let matrix = match descriptor.family() {
        Family::UnitaryN => haar_unitary_or_orthogonal(n, false, rng)?,
        Family::SpecialUnitaryN => {
            let mut q = haar_unitary_or_orthogonal(n, false, rng)?;
            let det = q.determinant();
            let fix = det.conj() / det.norm();
            for i in 0..n {
                q[(i, 0)] *= fix;
            }
            q
        }
        Family::SpecialOrthogonalOdd => {
            let mut q = haar_unitary_or_orthogonal(n, true, rng)?;
            if q.determinant().re < 0.0 {
                for i in 0..n {
                    q[(i, n - 1)] = -q[(i, n - 1)];
                }
            }
            q
        }
    };
    Ok(GroupElement::from_parts(descriptor, matrix))
}

/// Rotation block with eigenvalue `e^{iθ}` on `(1, -i)/√2`.
pub(crate) fn rotation_block(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

/// Embeds a torus point as a group element.
pub fn torus_embed(descriptor: &GroupDescriptor, t: &TorusPoint) -> Result<GroupElement> {
    check_rank(descriptor, t)?;
    let n = descriptor.matrix_size();
    let matrix = match descriptor.family() {
        Family::UnitaryN | Family::SpecialUnitaryN => {
            let values: Vec<Complex64> = monomial_phases(descriptor, t)
                .into_iter()
                .map(|a| Complex64::from_polar(1.0, a))
                .collect();
            linalg::diag(&values)
        }
        Family::SpecialOrthogonalOdd => {
            let mut m = CMatrix::zeros(n, n);
            for (j, theta) in t.angles().iter().enumerate() {
                let r = rotation_block(*theta);
                for a in 0..2 {
                    for b in 0..2 {
                        m[(2 * j + a, 2 * j + b)] = Complex64::new(r[a][b], 0.0);
                    }
                }
            }
            m[(n - 1, n - 1)] = Complex64::new(1.0, 0.0);
            m
        }
    };
    Ok(GroupElement::from_parts(descriptor, matrix))
}

fn check_rank(descriptor: &GroupDescriptor, t: &TorusPoint) -> Result<()> {
    if t.rank() != descriptor.torus_rank() {
        return Err(Error::InvalidInput(format!(
            "torus point has rank {}, {} needs {}",
            t.rank(),
            descriptor.name(),
            descriptor.torus_rank()
        )));
    }
    Ok(())
}

/// Angles of the monomials `p_j(e^{iθ})` in descriptor row order (unsorted).
pub(crate) fn monomial_phases(descriptor: &GroupDescriptor, t: &TorusPoint) -> Vec<f64> {
    descriptor
        .monomials()
        .iter()
        .map(|row| {
            let phase: f64 = row.iter().zip(t.angles()).map(|(&e, &theta)| e as f64 * theta).sum();
            linalg::wrap_angle(phase)
        })
        .collect()
}

/// `g^m` by repeated squaring, re-checked against unitarity drift.
pub fn power(g: &GroupElement, m: u64) -> Result<GroupElement> {
    if m == 0 {
        return Err(Error::Precondition("power needs m >= 1".into()));
    }
    let mut result: Option<CMatrix> = None;
    let mut base = g.matrix.clone();
    let mut e = m;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r * &base,
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = &base * &base;
    }
    let matrix = result.expect("m >= 1");
    let defect = linalg::unitarity_defect(&matrix);
    if defect > TAU_DRIFT {
        return Err(Error::Drift {
            defect,
            tolerance: TAU_DRIFT,
        });
    }
    Ok(GroupElement::from_parts(&g.descriptor, matrix))
}

/// The `N` eigenangles of `g` in `[0, 2π)`, sorted ascending.
pub fn eigenangles(g: &GroupElement) -> Result<Vec<f64>> {
    let (values, _) = linalg::normal_eigen(&g.matrix)?;
    let mut angles: Vec<f64> = values.iter().map(|z| linalg::wrap_angle(z.arg())).collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// Angles of the eigenvalue monomials at `t`, sorted ascending.
pub fn monomial_eval(descriptor: &GroupDescriptor, t: &TorusPoint) -> Result<Vec<f64>> {
    check_rank(descriptor, t)?;
    let mut angles = monomial_phases(descriptor, t);
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

/// One draw of the frozen eigenvalue law of `H^D`: the monomials evaluated
/// at iid uniform angles. Sorted ascending.
pub fn rains_limit_sample<R: Rng + ?Sized>(descriptor: &GroupDescriptor, rng: &mut R) -> Vec<f64> {
    let y = TorusPoint::uniform(descriptor.torus_rank(), rng);
    let mut angles = monomial_phases(descriptor, &y);
    angles.sort_by(f64::total_cmp);
    angles
}

/// Compares two angle multisets after sorting; returns the worst circular
/// distance between matched entries.
pub fn multiset_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "multisets of different sizes");
    // Sorting on [0, 2π) breaks near the wrap point; match greedily instead.
    let mut remaining: Vec<f64> = b.to_vec();
    let mut worst: f64 = 0.0;
    for &x in a {
        let (idx, d) = remaining
            .iter()
            .enumerate()
            .map(|(i, &y)| (i, linalg::circular_distance(x, y)))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("non-empty");
        worst = worst.max(d);
        remaining.swap_remove(idx);
    }
    worst
}
