//! Non-Haar laws on the implemented groups: trace-perturbed Haar, the
//! two-component mixture on `U(2)`, conjugated torus densities and point
//! masses (the latter only as a negative control).

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::groups::{haar_sample, torus_embed, Family, GroupDescriptor, GroupElement, TorusPoint};
use crate::laurent::{weyl_density, LaurentPoly};
use crate::preimage::{example_matrices, WeylElement};
use crate::torus::{sample_grid, FourierDensity, GridDensity, LatticePoint};

const REJECTION_MAX_ATTEMPTS: usize = 1_000_000;

/// Density `1 + a·Re Tr(g)/N` against Haar measure, `|a| ≤ 1`.
#[derive(Clone, Debug)]
pub struct PerturbedHaarLaw {
    descriptor: GroupDescriptor,
    strength: f64,
}

impl PerturbedHaarLaw {
    pub fn new(descriptor: GroupDescriptor, strength: f64) -> Result<Self> {
        if strength.is_nan() || strength.abs() > 1.0 {
            return Err(Error::InvalidInput(format!(
                "perturbation strength {strength} outside [-1, 1]"
            )));
        }
        Ok(Self { descriptor, strength })
    }

    pub fn descriptor(&self) -> &GroupDescriptor {
        &self.descriptor
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// Radon-Nikodym derivative against Haar at `g`.
    pub fn density(&self, g: &GroupElement) -> f64 {
        1.0 + self.strength * g.trace().re / self.descriptor.matrix_size() as f64
    }
}

/// Rejection sampling from Haar proposals with envelope `1 + |a|`.
pub fn sample_perturbed_haar<R: Rng + ?Sized>(law: &PerturbedHaarLaw, rng: &mut R) -> Result<GroupElement> {
    let bound = 1.0 + law.strength.abs();
    for _ in 0..REJECTION_MAX_ATTEMPTS {
        let g = haar_sample(&law.descriptor, rng)?;
        if law.strength == 0.0 || rng.random::<f64>() * bound < law.density(&g) {
            return Ok(g);
        }
    }
    Err(Error::SamplingFailed {
        attempts: REJECTION_MAX_ATTEMPTS,
    })
}

/// Exact Fourier coefficients of the torus marginal of a uniform random
/// preimage under the perturbed law: the Weyl density times
/// `1 + a·Σ_j (z_j + z̄_j) / (2N)`. Only `U(N)` with `N ≤ 4`.
pub fn symbolic_eigen_density(law: &PerturbedHaarLaw) -> Result<FourierDensity> {
    let d = &law.descriptor;
    if d.family() != Family::UnitaryN || d.matrix_size() > 4 {
        return Err(Error::Unsupported(format!(
            "symbolic eigen density is available for U(N), N <= 4, not {}",
            d.name()
        )));
    }
    let n = d.matrix_size();
    let c = Complex64::new(law.strength / (2.0 * n as f64), 0.0);
    let mut factor = LaurentPoly::constant(n, 1.0);
    for j in 0..n {
        let mut e = vec![0i64; n];
        e[j] = 1;
        factor = factor.add(&LaurentPoly::monomial(e.clone(), c));
        e[j] = -1;
        factor = factor.add(&LaurentPoly::monomial(e, c));
    }
    FourierDensity::from_laurent(&weyl_density(d).mul(&factor))
}

/// A law on the maximal torus given by a density.
#[derive(Clone, Debug)]
pub enum TorusLaw {
    Fourier(FourierDensity),
    Grid(GridDensity),
}

impl TorusLaw {
    pub fn rank(&self) -> usize {
        match self {
            Self::Fourier(d) => d.rank(),
            Self::Grid(d) => d.rank(),
        }
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> TorusPoint {
        match self {
            Self::Fourier(d) => d.sample_point(rng),
            Self::Grid(d) => {
                let a = sample_grid(d, rng, 1);
                let row = a.rows().next().expect("one row").to_vec();
                TorusPoint::wrapped(row)
            }
        }
    }

    pub fn fourier(&self) -> Option<&FourierDensity> {
        match self {
            Self::Fourier(d) => Some(d),
            Self::Grid(_) => None,
        }
    }
}

/// Product density with marginal `(1 + cos θ)/(2π)` on each axis.
pub fn raised_cosine_density(rank: usize) -> FourierDensity {
    let coeffs: BTreeMap<LatticePoint, Complex64> = crate::torus::box_points(rank, 1)
        .into_iter()
        .map(|p| {
            let nonzero = p.iter().filter(|x| **x != 0).count() as i32;
            (p, Complex64::new(0.5f64.powi(nonzero), 0.0))
        })
        .collect();
    FourierDensity::new(rank, coeffs).expect("raised cosine product is a density")
}

/// `U = X·D₁ + (1 - X)·a D₂ a*` on `U(2)` with a fair coin `X`.
#[derive(Clone, Debug)]
pub struct MixtureU2Law {
    d1: TorusLaw,
    d2: TorusLaw,
    a: GroupElement,
    p: GroupElement,
}

impl Default for MixtureU2Law {
    fn default() -> Self {
        let d = TorusLaw::Fourier(raised_cosine_density(2));
        Self::new(d.clone(), d).expect("rank 2 densities")
    }
}

impl MixtureU2Law {
    pub fn new(d1: TorusLaw, d2: TorusLaw) -> Result<Self> {
        if d1.rank() != 2 || d2.rank() != 2 {
            return Err(Error::InvalidInput(
                "mixture densities must live on a rank 2 torus".into(),
            ));
        }
        let (a, p) = example_matrices();
        Ok(Self { d1, d2, a, p })
    }

    pub fn descriptor(&self) -> &GroupDescriptor {
        self.a.descriptor()
    }

    pub fn d1(&self) -> &TorusLaw {
        &self.d1
    }

    pub fn d2(&self) -> &TorusLaw {
        &self.d2
    }

    /// The rotation conjugating the second component.
    pub fn a(&self) -> &GroupElement {
        &self.a
    }

    /// The coordinate swap.
    pub fn p(&self) -> &GroupElement {
        &self.p
    }
}

pub fn sample_mixture_u2<R: Rng + ?Sized>(law: &MixtureU2Law, rng: &mut R) -> GroupElement {
    let desc = law.descriptor().clone();
    if rng.random::<bool>() {
        torus_embed(&desc, &law.d1.sample_point(rng)).expect("rank 2")
    } else {
        torus_embed(&desc, &law.d2.sample_point(rng))
            .expect("rank 2")
            .conjugate_by(&law.a)
    }
}

/// `X·Y + (1 - X)·a Y a*` with `Y` uniform on the torus.
pub fn sample_mixture_limit<R: Rng + ?Sized>(law: &MixtureU2Law, rng: &mut R) -> GroupElement {
    let desc = law.descriptor().clone();
    let x = rng.random::<bool>();
    let y = torus_embed(&desc, &TorusPoint::uniform(2, rng)).expect("rank 2");
    if x {
        y
    } else {
        y.conjugate_by(&law.a)
    }
}

/// `V t V⁻¹` with `V` Haar and `t` drawn from a torus density.
#[derive(Clone, Debug)]
pub struct ConjugatedTorusLaw {
    descriptor: GroupDescriptor,
    torus: TorusLaw,
}

impl ConjugatedTorusLaw {
    pub fn new(descriptor: GroupDescriptor, torus: TorusLaw) -> Result<Self> {
        if torus.rank() != descriptor.torus_rank() {
            return Err(Error::InvalidInput(format!(
                "torus density of rank {} for {} (rank {})",
                torus.rank(),
                descriptor.name(),
                descriptor.torus_rank()
            )));
        }
        Ok(Self { descriptor, torus })
    }

    pub fn descriptor(&self) -> &GroupDescriptor {
        &self.descriptor
    }

    pub fn torus(&self) -> &TorusLaw {
        &self.torus
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GroupElement> {
        let v = haar_sample(&self.descriptor, rng)?;
        let t = self.torus.sample_point(rng);
        Ok(torus_embed(&self.descriptor, &t)?.conjugate_by(&v))
    }
}

/// Average of `d ∘ w` over the Weyl group: the torus density of a uniformly
/// random preimage of an element whose torus part has density `d`.
pub fn weyl_symmetrize(descriptor: &GroupDescriptor, d: &FourierDensity) -> Result<FourierDensity> {
    let all = WeylElement::all(descriptor);
    let weight = 1.0 / all.len() as f64;
    let mut coeffs: BTreeMap<LatticePoint, Complex64> = BTreeMap::new();
    for w in &all {
        for (p, c) in d.coefficients() {
            *coeffs.entry(w.pull_back_character(p)).or_default() += c * weight;
        }
    }
    coeffs.retain(|_, c| c.norm() > 1e-14);
    FourierDensity::new(d.rank(), coeffs)
}

/// Every law an experiment can draw from.
#[derive(Clone, Debug)]
pub enum Law {
    Haar(GroupDescriptor),
    Perturbed(PerturbedHaarLaw),
    MixtureU2(MixtureU2Law),
    TorusDensity(ConjugatedTorusLaw),
    /// Point mass at an element; has atoms, so its powers have no uniform-preimage limit.
    PointMass(GroupElement),
}

impl Law {
    pub fn descriptor(&self) -> &GroupDescriptor {
        match self {
            Self::Haar(d) => d,
            Self::Perturbed(l) => l.descriptor(),
            Self::MixtureU2(l) => l.descriptor(),
            Self::TorusDensity(l) => l.descriptor(),
            Self::PointMass(g) => g.descriptor(),
        }
    }

    /// Whether the torus part of a uniform random preimage has a density.
    pub fn has_torus_density(&self) -> bool {
        !matches!(self, Self::PointMass(_))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GroupElement> {
        match self {
            Self::Haar(d) => haar_sample(d, rng),
            Self::Perturbed(l) => sample_perturbed_haar(l, rng),
            Self::MixtureU2(l) => Ok(sample_mixture_u2(l, rng)),
            Self::TorusDensity(l) => l.sample(rng),
            Self::PointMass(g) => Ok(g.clone()),
        }
    }

    /// Exact Fourier coefficients of the torus marginal of a uniform random
    /// preimage, where available.
    pub fn symbolic_eigen_density(&self) -> Result<FourierDensity> {
        let unsupported = || Error::Unsupported("grid densities have no finite Fourier expansion".into());
        match self {
            Self::Haar(d) => FourierDensity::from_laurent(&weyl_density(d)),
            Self::Perturbed(l) => symbolic_eigen_density(l),
            Self::MixtureU2(l) => {
                let d1 = l.d1.fourier().ok_or_else(unsupported)?;
                let d2 = l.d2.fourier().ok_or_else(unsupported)?;
                let mut coeffs = BTreeMap::<LatticePoint, Complex64>::new();
                for d in [d1, d2] {
                    for (p, c) in weyl_symmetrize(l.descriptor(), d)?.coefficients() {
                        *coeffs.entry(p.clone()).or_default() += c * 0.5;
                    }
                }
                FourierDensity::new(2, coeffs)
            }
            Self::TorusDensity(l) => {
                let d = l.torus.fourier().ok_or_else(unsupported)?;
                weyl_symmetrize(&l.descriptor, d)
            }
            Self::PointMass(_) => Err(Error::Unsupported("a point mass has no density".into())),
        }
    }
}
