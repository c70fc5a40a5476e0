//! Sparse Laurent polynomials in `n` torus variables, used to expand Weyl
//! densities and their perturbations exactly.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::groups::{Family, GroupDescriptor};
use crate::torus::LatticePoint;

const PRUNE: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct LaurentPoly {
    rank: usize,
    terms: BTreeMap<LatticePoint, Complex64>,
}

impl LaurentPoly {
    pub fn zero(rank: usize) -> Self {
        Self {
            rank,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(rank: usize, c: f64) -> Self {
        Self::monomial(vec![0; rank], Complex64::new(c, 0.0))
    }

    pub fn monomial(exponent: LatticePoint, c: Complex64) -> Self {
        let rank = exponent.len();
        let mut terms = BTreeMap::new();
        if c != Complex64::new(0.0, 0.0) {
            terms.insert(exponent, c);
        }
        Self { rank, terms }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn terms(&self) -> &BTreeMap<LatticePoint, Complex64> {
        &self.terms
    }

    pub fn into_terms(self) -> BTreeMap<LatticePoint, Complex64> {
        self.terms
    }

    pub fn coefficient(&self, p: &[i64]) -> Complex64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.rank, other.rank);
        let mut terms = self.terms.clone();
        for (p, c) in &other.terms {
            *terms.entry(p.clone()).or_default() += c;
        }
        Self { rank: self.rank, terms }.pruned()
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.rank, other.rank);
        let mut terms: BTreeMap<LatticePoint, Complex64> = BTreeMap::new();
        for (p, a) in &self.terms {
            for (q, b) in &other.terms {
                let s: LatticePoint = p.iter().zip(q).map(|(x, y)| x + y).collect();
                *terms.entry(s).or_default() += a * b;
            }
        }
        Self { rank: self.rank, terms }.pruned()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rank: self.rank,
            terms: self.terms.iter().map(|(p, v)| (p.clone(), v * c)).collect(),
        }
        .pruned()
    }

    fn pruned(mut self) -> Self {
        self.terms.retain(|_, c| c.norm() > PRUNE);
        self
    }

    /// `|z^p - z^q|^2 = 2 - z^{p-q} - z^{q-p}` on the torus.
    pub fn abs2_difference(p: &[i64], q: &[i64]) -> Self {
        let d: LatticePoint = p.iter().zip(q).map(|(a, b)| a - b).collect();
        let neg: LatticePoint = d.iter().map(|x| -x).collect();
        let rank = p.len();
        Self::constant(rank, 2.0)
            .add(&Self::monomial(d, Complex64::new(-1.0, 0.0)))
            .add(&Self::monomial(neg, Complex64::new(-1.0, 0.0)))
    }
}

/// Density of the Haar torus marginal (uniformly random preimage) against
/// normalized torus measure, from the Weyl integration formula. Normalized so
/// the constant coefficient is 1.
pub fn weyl_density(descriptor: &GroupDescriptor) -> LaurentPoly {
    let density = weyl_product(descriptor);
    let a0 = density.coefficient(&vec![0; descriptor.torus_rank()]).re;
    density.scale(1.0 / a0)
}

/// Product of `|1 - z^α|^2` over the roots `α`; its constant term is `|W|`.
fn weyl_product(descriptor: &GroupDescriptor) -> LaurentPoly {
    let rank = descriptor.torus_rank();
    let zero = vec![0i64; rank];
    let unit = |j: usize, s: i64| {
        let mut e = vec![0i64; rank];
        e[j] = s;
        e
    };
    let mut density = LaurentPoly::constant(rank, 1.0);
    match descriptor.family() {
        Family::UnitaryN | Family::SpecialUnitaryN => {
            let mons = descriptor.monomials();
            for j in 0..mons.len() {
                for k in j + 1..mons.len() {
                    density = density.mul(&LaurentPoly::abs2_difference(&mons[j], &mons[k]));
                }
            }
        }
        Family::SpecialOrthogonalOdd => {
            // roots ±e_j and ±e_j ± e_k
            for j in 0..rank {
                density = density.mul(&LaurentPoly::abs2_difference(&unit(j, 1), &zero));
                for k in j + 1..rank {
                    let plus: LatticePoint = unit(j, 1).iter().zip(unit(k, 1)).map(|(a, b)| a + b).collect();
                    let minus: LatticePoint = unit(j, 1).iter().zip(unit(k, -1)).map(|(a, b)| a + b).collect();
                    density = density.mul(&LaurentPoly::abs2_difference(&plus, &zero));
                    density = density.mul(&LaurentPoly::abs2_difference(&minus, &zero));
                }
            }
        }
    }
    density
}
