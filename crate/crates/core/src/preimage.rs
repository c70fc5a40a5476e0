//! Preimages under `ψ(vT, t) = v t v⁻¹`, the Weyl group action on them and
//! the limit-law sampler `ψ(flag, Y)` with `Y` uniform on the torus.
//!
//! Eigenvectors are normalized so their largest-modulus entry is real and
//! positive, which makes [`preimage_sorted`] a deterministic function of its
//! input. Inputs whose eigenangles are closer than [`TAU_GAP`] are rejected.

use std::f64::consts::{PI, SQRT_2, TAU};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::groups::{torus_embed, Family, GroupDescriptor, GroupElement, TorusPoint};
use crate::linalg::{self, CMatrix};
use crate::torus::LatticePoint;

/// Minimal circular separation of eigenangles for a regular element.
pub const TAU_GAP: f64 = 1e-8;

/// A pair `(vT, t)` with `ψ(vT, t) = v t v⁻¹`. `flag` is one representative
/// of its coset.
#[derive(Clone, Debug)]
pub struct Preimage {
    pub flag: GroupElement,
    pub torus: TorusPoint,
}

impl Preimage {
    pub fn psi(&self) -> Result<GroupElement> {
        psi(&self.flag, &self.torus)
    }
}

/// `v · t · v⁻¹`.
pub fn psi(v: &GroupElement, t: &TorusPoint) -> Result<GroupElement> {
    Ok(torus_embed(v.descriptor(), t)?.conjugate_by(v))
}

/// An element of `N(T)/T`: a permutation and, for `SO(2k+1)`, a sign per
/// rotation block. Acts on torus angles by `θ'[σ(j)] = s_j θ_j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeylElement {
    family: Family,
    perm: Vec<usize>,
    signs: Vec<i64>,
}

fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter()
        .all(|&i| i < perm.len() && !std::mem::replace(&mut seen[i], true))
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("pivot exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn permutation_sign(perm: &[usize]) -> i64 {
    let mut seen = vec![false; perm.len()];
    let mut sign = 1;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// Number of permuted slots: `N` for `U(N)` and `SU(N)`, `k` for `SO(2k+1)`.
fn weyl_degree(descriptor: &GroupDescriptor) -> usize {
    match descriptor.family() {
        Family::SpecialOrthogonalOdd => descriptor.torus_rank(),
        _ => descriptor.matrix_size(),
    }
}

impl WeylElement {
    /// `signs` must be empty for `U`/`SU` and have one `±1` per block for `SO`.
    pub fn new(descriptor: &GroupDescriptor, perm: Vec<usize>, signs: Vec<i64>) -> Result<Self> {
        let k = weyl_degree(descriptor);
        if perm.len() != k || !is_permutation(&perm) {
            return Err(Error::InvalidInput(format!(
                "{perm:?} is not a permutation of {k} slots"
            )));
        }
        let want_signs = if descriptor.family() == Family::SpecialOrthogonalOdd {
            k
        } else {
            0
        };
        if signs.len() != want_signs || signs.iter().any(|s| s.abs() != 1) {
            return Err(Error::InvalidInput(format!(
                "{} needs {want_signs} signs in ±1, got {signs:?}",
                descriptor.name()
            )));
        }
        Ok(Self {
            family: descriptor.family(),
            perm,
            signs,
        })
    }

    pub fn identity(descriptor: &GroupDescriptor) -> Self {
        let k = weyl_degree(descriptor);
        let signs = if descriptor.family() == Family::SpecialOrthogonalOdd {
            vec![1; k]
        } else {
            vec![]
        };
        Self {
            family: descriptor.family(),
            perm: (0..k).collect(),
            signs,
        }
    }

    pub fn random<R: Rng + ?Sized>(descriptor: &GroupDescriptor, rng: &mut R) -> Self {
        let mut w = Self::identity(descriptor);
        w.perm.shuffle(rng);
        for s in &mut w.signs {
            *s = if rng.random::<bool>() { 1 } else { -1 };
        }
        w
    }

    /// Every element of the Weyl group, `|W|` in total.
    pub fn all(descriptor: &GroupDescriptor) -> Vec<Self> {
        let k = weyl_degree(descriptor);
        let so = descriptor.family() == Family::SpecialOrthogonalOdd;
        let mut out = Vec::with_capacity(descriptor.weyl_order() as usize);
        let mut perm: Vec<usize> = (0..k).collect();
        loop {
            if so {
                for mask in 0..1u64 << k {
                    let signs = (0..k).map(|j| if mask >> j & 1 == 1 { -1 } else { 1 }).collect();
                    out.push(Self {
                        family: descriptor.family(),
                        perm: perm.clone(),
                        signs,
                    });
                }
            } else {
                out.push(Self {
                    family: descriptor.family(),
                    perm: perm.clone(),
                    signs: vec![],
                });
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        out
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[i64] {
        &self.signs
    }

    /// `self ∘ other`: acting by the result equals acting by `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.family, other.family);
        let perm = other.perm.iter().map(|&j| self.perm[j]).collect();
        let signs = other
            .signs
            .iter()
            .zip(&other.perm)
            .map(|(s2, &j)| s2 * self.signs[j])
            .collect();
        Self {
            family: self.family,
            perm,
            signs,
        }
    }

    /// A matrix `n ∈ N(T)` with `n · embed(t) · n⁻¹ = embed(w·t)`.
    pub fn representative(&self, descriptor: &GroupDescriptor) -> GroupElement {
        let n = descriptor.matrix_size();
        let one = Complex64::new(1.0, 0.0);
        let mut m = CMatrix::zeros(n, n);
        match self.family {
            Family::UnitaryN | Family::SpecialUnitaryN => {
                for (j, &s) in self.perm.iter().enumerate() {
                    m[(s, j)] = one;
                }
                if self.family == Family::SpecialUnitaryN && permutation_sign(&self.perm) < 0 {
                    m[(self.perm[0], 0)] = -one;
                }
            }
            Family::SpecialOrthogonalOdd => {
                for (j, (&s, &sign)) in self.perm.iter().zip(&self.signs).enumerate() {
                    m[(2 * s, 2 * j)] = one;
                    m[(2 * s + 1, 2 * j + 1)] = one * sign as f64;
                }
                m[(n - 1, n - 1)] = one * self.signs.iter().product::<i64>() as f64;
            }
        }
        GroupElement::from_parts(descriptor, m)
    }

    pub fn act_on_torus(&self, t: &TorusPoint) -> TorusPoint {
        match self.family {
            Family::UnitaryN | Family::SpecialOrthogonalOdd => {
                let mut out = vec![0.0; t.rank()];
                for (j, &theta) in t.angles().iter().enumerate() {
                    let s = self.signs.get(j).copied().unwrap_or(1) as f64;
                    out[self.perm[j]] = s * theta;
                }
                TorusPoint::wrapped(out)
            }
            Family::SpecialUnitaryN => {
                let mut full = t.angles().to_vec();
                full.push(-full.iter().sum::<f64>());
                let mut out = vec![0.0; full.len()];
                for (j, theta) in full.into_iter().enumerate() {
                    out[self.perm[j]] = theta;
                }
                out.pop();
                TorusPoint::wrapped(out)
            }
        }
    }

    /// The exponent `p'` with `e^{i p'·θ} = e^{i p·(w·θ)}`.
    pub fn pull_back_character(&self, p: &[i64]) -> LatticePoint {
        match self.family {
            Family::UnitaryN => self.perm.iter().map(|&s| p[s]).collect(),
            Family::SpecialOrthogonalOdd => self
                .perm
                .iter()
                .zip(&self.signs)
                .map(|(&s, sign)| sign * p[s])
                .collect(),
            Family::SpecialUnitaryN => {
                let q = |i: usize| p.get(i).copied().unwrap_or(0);
                let last = q(self.perm[self.perm.len() - 1]);
                self.perm[..self.perm.len() - 1].iter().map(|&s| q(s) - last).collect()
            }
        }
    }
}

/// `(V, t) ↦ (V n⁻¹, n t n⁻¹)` for a representative `n` of `w`.
pub fn weyl_action(w: &WeylElement, pre: &Preimage) -> Preimage {
    let n = w.representative(pre.flag.descriptor());
    Preimage {
        flag: pre.flag.mul(&n.inverse()),
        torus: w.act_on_torus(&pre.torus),
    }
}

/// Whether `v⁻¹ w` lies in the maximal torus, within `tol`.
pub fn same_coset(v: &GroupElement, w: &GroupElement, tol: f64) -> bool {
    let d = v.inverse().mul(w);
    let m = d.matrix();
    let n = m.nrows();
    match v.descriptor().family() {
        Family::UnitaryN | Family::SpecialUnitaryN => (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)].norm() <= tol)),
        Family::SpecialOrthogonalOdd => {
            let block = |i: usize| if i == n - 1 { usize::MAX } else { i / 2 };
            let off_ok = (0..n).all(|i| (0..n).all(|j| block(i) == block(j) || m[(i, j)].norm() <= tol));
            let blocks_ok = (0..n / 2).all(|b| {
                let (i, j) = (2 * b, 2 * b + 1);
                (m[(i, i)] - m[(j, j)]).norm() <= tol && (m[(i, j)] + m[(j, i)]).norm() <= tol
            });
            off_ok && blocks_ok && (m[(n - 1, n - 1)].re - 1.0).abs() <= tol
        }
    }
}

/// Searches the Weyl group for `w` with `weyl_action(w, from) = to`, i.e.
/// equal torus parts and equal flag cosets.
pub fn find_weyl_element(from: &Preimage, to: &Preimage, tol: f64) -> Option<WeylElement> {
    WeylElement::all(from.flag.descriptor()).into_iter().find(|w| {
        let moved = weyl_action(w, from);
        moved
            .torus
            .angles()
            .iter()
            .zip(to.torus.angles())
            .all(|(a, b)| linalg::circular_distance(*a, *b) <= tol)
            && same_coset(&moved.flag, &to.flag, tol)
    })
}

fn min_circular_gap(angles: &[f64]) -> f64 {
    let mut sorted = angles.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut gap = TAU - (sorted[sorted.len() - 1] - sorted[0]);
    for w in sorted.windows(2) {
        gap = gap.min(w[1] - w[0]);
    }
    gap
}

fn unit_eigenvector(q: &CMatrix, col: usize) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = q.column(col).iter().copied().collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut v {
        *z /= norm;
    }
    linalg::normalize_phase(&mut v);
    v
}

/// Modified Gram-Schmidt on the columns, in order.
fn orthonormalize(m: &mut CMatrix) {
    for j in 0..m.ncols() {
        for i in 0..j {
            let proj = m.column(i).dotc(&m.column(j));
            let ci = m.column(i).clone_owned();
            m.column_mut(j).axpy(-proj, &ci, Complex64::new(1.0, 0.0));
        }
        let norm = m.column(j).norm();
        m.column_mut(j).unscale_mut(norm);
    }
}

/// The unique preimage with torus angles in the fundamental chamber:
/// strictly increasing for `U`/`SU`, increasing within `(0, π)` for `SO`.
pub fn preimage_sorted(u: &GroupElement) -> Result<Preimage> {
    let desc = u.descriptor();
    let n = desc.matrix_size();
    let (values, q) = linalg::normal_eigen(u.matrix())?;
    let angles: Vec<f64> = values.iter().map(|z| linalg::wrap_angle(z.arg())).collect();
    let gap = min_circular_gap(&angles);
    if gap < TAU_GAP {
        return Err(Error::Degenerate {
            gap,
            tolerance: TAU_GAP,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));

    match desc.family() {
        Family::UnitaryN | Family::SpecialUnitaryN => {
            let mut v = CMatrix::zeros(n, n);
            for (j, &src) in order.iter().enumerate() {
                for (i, z) in unit_eigenvector(&q, src).into_iter().enumerate() {
                    v[(i, j)] = z;
                }
            }
            orthonormalize(&mut v);
            let sorted: Vec<f64> = order.iter().map(|&i| angles[i]).collect();
            let torus = if desc.family() == Family::SpecialUnitaryN {
                let det = v.determinant();
                v *= Complex64::from_polar(1.0, -det.arg() / n as f64);
                TorusPoint::wrapped(sorted[..n - 1].iter().copied())
            } else {
                TorusPoint::wrapped(sorted)
            };
            Ok(Preimage {
                flag: GroupElement::from_parts(desc, v),
                torus,
            })
        }
        Family::SpecialOrthogonalOdd => {
            let fixed = (0..n)
                .min_by(|&a, &b| {
                    let da = linalg::circular_distance(angles[a], 0.0);
                    let db = linalg::circular_distance(angles[b], 0.0);
                    da.total_cmp(&db)
                })
                .expect("n >= 3");
            let upper: Vec<usize> = order
                .iter()
                .copied()
                .filter(|&i| i != fixed && angles[i] < PI)
                .collect();
            let k = desc.torus_rank();
            if upper.len() != k {
                return Err(Error::EigenSolver);
            }
            let mut v = CMatrix::zeros(n, n);
            for (j, &src) in upper.iter().enumerate() {
                let w = unit_eigenvector(&q, src);
                for (i, z) in w.iter().enumerate() {
                    v[(i, 2 * j)] = Complex64::new(SQRT_2 * z.re, 0.0);
                    v[(i, 2 * j + 1)] = Complex64::new(-SQRT_2 * z.im, 0.0);
                }
            }
            for (i, z) in unit_eigenvector(&q, fixed).into_iter().enumerate() {
                v[(i, n - 1)] = Complex64::new(z.re, 0.0);
            }
            orthonormalize(&mut v);
            if v.determinant().re < 0.0 {
                for i in 0..n {
                    v[(i, n - 1)] = -v[(i, n - 1)];
                }
            }
            let torus = TorusPoint::wrapped(upper.iter().map(|&i| angles[i]));
            Ok(Preimage {
                flag: GroupElement::from_parts(desc, v),
                torus,
            })
        }
    }
}

/// The sorted preimage moved by an independent uniform Weyl element, which
/// makes it uniform over the `|W|` preimages of `u`.
pub fn preimage_uniform<R: Rng + ?Sized>(u: &GroupElement, rng: &mut R) -> Result<Preimage> {
    let sorted = preimage_sorted(u)?;
    let w = WeylElement::random(u.descriptor(), rng);
    Ok(weyl_action(&w, &sorted))
}

/// Same flag, torus part raised to the `m`-th power. Requires `m ≥ 1`.
pub fn power_preimage(pre: &Preimage, m: u64) -> Result<Preimage> {
    if m == 0 {
        return Err(Error::Precondition("power needs m >= 1".into()));
    }
    Ok(Preimage {
        flag: pre.flag.clone(),
        torus: pre.torus.power(m),
    })
}

/// `ψ(flag, Y)` with a fresh uniform torus point `Y`.
pub fn limit_law_sample<R: Rng + ?Sized>(pre: &Preimage, rng: &mut R) -> GroupElement {
    let y = TorusPoint::uniform(pre.torus.rank(), rng);
    psi(&pre.flag, &y).expect("rank matches the flag's group")
}

/// The matrices `a` (rotation by π/4) and `p` (coordinate swap) in `U(2)`.
pub fn example_matrices() -> (GroupElement, GroupElement) {
    let u2 = GroupDescriptor::unitary(2).expect("U(2)");
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |x: f64| Complex64::new(x, 0.0);
    let a = CMatrix::from_row_slice(2, 2, &[c(h), c(-h), c(h), c(h)]);
    let p = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    (GroupElement::from_parts(&u2, a), GroupElement::from_parts(&u2, p))
}
