//! Densities on the torus `[0, 2π)^n` and their pushforwards under
//! `θ ↦ m·θ mod 2π`.
//!
//! Two representations are kept side by side:
//! - [`FourierDensity`]: finitely many series coefficients `a_p` with
//!   `ρ(θ) = Σ a_p e^{i p·θ}` against normalized torus measure (`a_0 = 1`).
//!   Its pushforward keeps the coefficients on the sublattice `mℤⁿ`.
//! - [`GridDensity`]: values against Lebesgue measure on a uniform grid of
//!   `G` points per axis. Its pushforward averages the `mⁿ` preimage branches.
//!
//! The two routes are algebraically independent and are checked against each
//! other in the tests.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{scaled_angle, TorusPoint};
use crate::laurent::LaurentPoly;
use crate::linalg::{self, wrap_angle};

/// A point of `ℤⁿ` indexing a Fourier coefficient.
pub type LatticePoint = Vec<i64>;

/// Slack allowed below zero before a trigonometric polynomial stops counting
/// as a density.
pub const TAU_NEG: f64 = 1e-9;

const COEFF_TOL: f64 = 1e-12;
const GRID_MASS_TOL: f64 = 1e-9;
const VALIDATION_POINTS_CAP: usize = 1 << 20;

/// A real trigonometric polynomial density given by its series coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FourierDensityJson", into = "FourierDensityJson")]
pub struct FourierDensity {
    rank: usize,
    coeffs: BTreeMap<LatticePoint, Complex64>,
}

#[derive(Serialize, Deserialize)]
struct CoeffJson {
    p: LatticePoint,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct FourierDensityJson {
    rank: usize,
    coeffs: Vec<CoeffJson>,
}

impl TryFrom<FourierDensityJson> for FourierDensity {
    type Error = Error;

    fn try_from(json: FourierDensityJson) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for c in json.coeffs {
            if coeffs.insert(c.p.clone(), Complex64::new(c.re, c.im)).is_some() {
                return Err(Error::InvalidInput(format!("duplicate lattice point {:?}", c.p)));
            }
        }
        FourierDensity::new(json.rank, coeffs)
    }
}

impl From<FourierDensity> for FourierDensityJson {
    fn from(d: FourierDensity) -> Self {
        Self {
            rank: d.rank,
            coeffs: d
                .coeffs
                .into_iter()
                .map(|(p, c)| CoeffJson { p, re: c.re, im: c.im })
                .collect(),
        }
    }
}

fn is_zero_point(p: &[i64]) -> bool {
    p.iter().all(|&x| x == 0)
}

fn negated(p: &[i64]) -> LatticePoint {
    p.iter().map(|x| -x).collect()
}

impl FourierDensity {
    /// Validates normalization, Hermitian symmetry and nonnegativity.
    pub fn new(rank: usize, coeffs: BTreeMap<LatticePoint, Complex64>) -> Result<Self> {
        let d = Self::from_parts(rank, coeffs)?;
        d.check_nonnegative()?;
        Ok(d)
    }

    /// Checks everything except nonnegativity.
    fn from_parts(rank: usize, mut coeffs: BTreeMap<LatticePoint, Complex64>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidInput("torus rank must be positive".into()));
        }
        if let Some(p) = coeffs.keys().find(|p| p.len() != rank) {
            return Err(Error::InvalidInput(format!("lattice point {p:?} has wrong rank")));
        }
        coeffs.retain(|_, c| c.norm() > 0.0);
        let zero = vec![0; rank];
        let a0 = coeffs.get(&zero).copied().unwrap_or_default();
        if (a0 - Complex64::new(1.0, 0.0)).norm() > COEFF_TOL {
            return Err(Error::InvalidInput(format!("constant coefficient {a0} is not 1")));
        }
        for (p, c) in &coeffs {
            let mirror = coeffs.get(&negated(p)).copied().unwrap_or_default();
            if (mirror - c.conj()).norm() > COEFF_TOL {
                return Err(Error::InvalidInput(format!(
                    "coefficients at {p:?} and its negative are not conjugate"
                )));
            }
        }
        Ok(Self { rank, coeffs })
    }

    pub fn uniform(rank: usize) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(vec![0; rank], Complex64::new(1.0, 0.0));
        Self { rank, coeffs }
    }

    pub fn from_laurent(poly: &LaurentPoly) -> Result<Self> {
        Self::new(poly.rank(), poly.terms().clone())
    }

    /// A random density with support in `[-degree, degree]^rank`. The
    /// non-constant coefficients have total modulus at most 0.9, so the
    /// density is bounded below by 0.1.
    pub fn random<R: Rng + ?Sized>(rank: usize, degree: i64, rng: &mut R) -> Self {
        let mut coeffs = BTreeMap::new();
        for p in box_points(rank, degree) {
            // one representative of each ±p pair
            if p.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0) {
                let c = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                coeffs.insert(p, c);
            }
        }
        let total: f64 = 2.0 * coeffs.values().map(|c| c.norm()).sum::<f64>();
        let scale = if total > 0.0 {
            0.9 * rng.random::<f64>().max(0.05) / total
        } else {
            0.0
        };
        let mut full = BTreeMap::new();
        for (p, c) in coeffs {
            full.insert(negated(&p), (c * scale).conj());
            full.insert(p, c * scale);
        }
        full.insert(vec![0; rank], Complex64::new(1.0, 0.0));
        Self::from_parts(rank, full).expect("random coefficients are Hermitian and normalized")
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn coefficients(&self) -> &BTreeMap<LatticePoint, Complex64> {
        &self.coeffs
    }

    /// Largest `|p_j|` over the support.
    pub fn max_degree(&self) -> i64 {
        self.coeffs
            .keys()
            .flat_map(|p| p.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Upper bound on `sup ρ`.
    pub fn sup_bound(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    fn check_nonnegative(&self) -> Result<()> {
        let deg = self.max_degree() as usize;
        let mut g = (4 * deg + 4).max(16);
        let cap = (VALIDATION_POINTS_CAP as f64).powf(1.0 / self.rank as f64).floor() as usize;
        g = g.min(cap.max(2 * deg + 1));
        let values = self.evaluate_on_grid(g);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -TAU_NEG {
            return Err(Error::NotADensity { min });
        }
        Ok(())
    }

    /// `ρ` evaluated at the grid points `2πk/G` (row-major, against normalized
    /// torus measure).
    fn evaluate_on_grid(&self, g: usize) -> Vec<f64> {
        let deg = self.max_degree();
        let width = (2 * deg + 1) as usize;
        // table[k * width + (p + deg)] = e^{i p 2πk/G}
        let table: Vec<Complex64> = (0..g)
            .flat_map(|k| {
                let theta = TAU * k as f64 / g as f64;
                (-deg..=deg).map(move |p| Complex64::from_polar(1.0, p as f64 * theta))
            })
            .collect();
        let terms: Vec<(Vec<usize>, Complex64)> = self
            .coeffs
            .iter()
            .map(|(p, c)| (p.iter().map(|x| (x + deg) as usize).collect(), *c))
            .collect();
        let total = g.pow(self.rank as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.rank];
        for _ in 0..total {
            let mut acc = 0.0;
            for (offsets, c) in &terms {
                let mut z = *c;
                for (axis, off) in offsets.iter().enumerate() {
                    z *= table[idx[axis] * width + off];
                }
                acc += z.re;
            }
            out.push(acc);
            advance(&mut idx, g);
        }
        out
    }

    /// Draws `s` points by rejection against the uniform proposal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, s: usize) -> AngleSample {
        let mut data = Vec::with_capacity(s * self.rank);
        for _ in 0..s {
            data.extend_from_slice(self.sample_point(rng).angles());
        }
        AngleSample { rank: self.rank, data }
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> TorusPoint {
        let bound = self.sup_bound();
        loop {
            let t = TorusPoint::uniform(self.rank, rng);
            if rng.random::<f64>() * bound <= evaluate(self, &t) {
                return t;
            }
        }
    }
}

/// Lattice points of `[-degree, degree]^rank` in lexicographic order.
pub fn box_points(rank: usize, degree: i64) -> Vec<LatticePoint> {
    let width = (2 * degree + 1) as usize;
    let mut out = Vec::with_capacity(width.pow(rank as u32));
    let mut idx = vec![0usize; rank];
    for _ in 0..width.pow(rank as u32) {
        out.push(idx.iter().map(|&k| k as i64 - degree).collect());
        advance(&mut idx, width);
    }
    out
}

/// Row-major odometer step.
fn advance(idx: &mut [usize], base: usize) {
    for slot in idx.iter_mut().rev() {
        *slot += 1;
        if *slot < base {
            return;
        }
        *slot = 0;
    }
}

/// Keeps the coefficients at lattice points divisible by `m` and divides
/// their indices by `m`: the density of `m·X` when `X ~ d`.
pub fn fourier_pushforward(d: &FourierDensity, m: u64) -> Result<FourierDensity> {
    if m == 0 {
        return Err(Error::Precondition("pushforward needs m >= 1".into()));
    }
    let m = m as i64;
    let coeffs = d
        .coeffs
        .iter()
        .filter(|(p, _)| p.iter().all(|x| x % m == 0))
        .map(|(p, c)| (p.iter().map(|x| x / m).collect(), *c))
        .collect();
    Ok(FourierDensity { rank: d.rank, coeffs })
}

/// `ν̂(p) = E[e^{-i p·X}]`, which equals the stored series coefficient `a_p`.
pub fn fourier_coefficient(d: &FourierDensity, p: &[i64]) -> Complex64 {
    d.coeffs.get(p).copied().unwrap_or_default()
}

/// `M + 1` where `M` is the largest `|p_j|` over nonzero `p ≠ 0` in the
/// support; for every `m` at or above it the pushforward is uniform.
pub fn stationarity_threshold(d: &FourierDensity) -> u64 {
    let m = d
        .coeffs
        .keys()
        .filter(|p| !is_zero_point(p))
        .flat_map(|p| p.iter().map(|x| x.unsigned_abs()))
        .max()
        .unwrap_or(0);
    m + 1
}

/// Smallest `m₀` such that the pushforward is uniform for every `m ≥ m₀`:
/// one more than the largest `gcd(p)` over nonzero `p ≠ 0` in the support.
/// Never exceeds [`stationarity_threshold`].
pub fn exact_stationary_power(d: &FourierDensity) -> u64 {
    d.coeffs
        .keys()
        .filter(|p| !is_zero_point(p))
        .map(|p| p.iter().fold(0u64, |g, x| gcd(g, x.unsigned_abs())))
        .max()
        .unwrap_or(0)
        + 1
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Real part of the trigonometric series at `t`.
pub fn evaluate(d: &FourierDensity, t: &TorusPoint) -> f64 {
    d.coeffs
        .iter()
        .map(|(p, c)| {
            let phase: f64 = p.iter().zip(t.angles()).map(|(&k, &x)| k as f64 * x).sum();
            (c * Complex64::from_polar(1.0, phase)).re
        })
        .sum()
}

/// Pointwise evaluation on a `G`-point grid, rescaled to Lebesgue measure.
pub fn to_grid(d: &FourierDensity, grid_size: usize) -> Result<GridDensity> {
    let deg = d.max_degree() as usize;
    if grid_size <= 2 * deg {
        return Err(Error::Precondition(format!(
            "grid size {grid_size} aliases a degree-{deg} density"
        )));
    }
    let norm = TAU.powi(d.rank as i32);
    let mut values = d.evaluate_on_grid(grid_size);
    for v in values.iter_mut() {
        if *v < -TAU_NEG {
            return Err(Error::NotADensity { min: *v });
        }
        *v = v.max(0.0) / norm;
    }
    GridDensity::new(d.rank, grid_size, values)
}

/// A signed function on the uniform grid; value `k` is the function at
/// `θ = 2πk/G` and, for the step reconstruction, on the cell `[2πk/G, 2π(k+1)/G)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    rank: usize,
    grid_size: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(rank: usize, grid_size: usize, values: Vec<f64>) -> Result<Self> {
        if rank == 0 || grid_size == 0 {
            return Err(Error::InvalidInput("grid needs positive rank and size".into()));
        }
        let expected = grid_size
            .checked_pow(rank as u32)
            .ok_or_else(|| Error::InvalidInput("grid too large".into()))?;
        if values.len() != expected {
            return Err(Error::InvalidInput(format!(
                "expected {expected} grid values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            rank,
            grid_size,
            values,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn cell_volume(&self) -> f64 {
        (TAU / self.grid_size as f64).powi(self.rank as i32)
    }

    /// Riemann sum `(2π/G)ⁿ Σ values`.
    pub fn integral(&self) -> f64 {
        self.cell_volume() * linalg::compensated_sum(self.values.iter().copied())
    }

    pub fn l1_norm(&self) -> f64 {
        self.cell_volume() * linalg::compensated_sum(self.values.iter().map(|v| v.abs()))
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// How grid values are extended to a function before the branch average.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    /// Piecewise constant on the cells `[2πk/G, 2π(k+1)/G)`. The pushforward
    /// is exact for step functions, preserves integrals and never increases
    /// the L¹ norm.
    Step,
    /// The trigonometric interpolant of the samples. Exact for trigonometric
    /// polynomials of degree below `G/2`.
    BandLimited,
}

/// The branch-averaging operator
/// `(R f)(x) = m⁻ⁿ Σ_k f((x + 2πk)/m)` applied to a grid function.
pub fn branch_average(f: &GridFunction, m: u64, reconstruction: Reconstruction) -> Result<GridFunction> {
    if m == 0 {
        return Err(Error::Precondition("pushforward needs m >= 1".into()));
    }
    let g = f.grid_size;
    let m = m as usize;
    if !g.is_multiple_of(m) {
        return Err(Error::Precondition(format!("power {m} does not divide grid size {g}")));
    }
    if m == 1 {
        return Ok(f.clone());
    }
    let mut values = f.values.clone();
    let upsampler = match reconstruction {
        Reconstruction::Step => None,
        Reconstruction::BandLimited => Some(SpectralUpsampler::new(g, m)),
    };
    let mut line = vec![0.0; g];
    let mut out_line = vec![0.0; g];
    for axis in 0..f.rank {
        let stride = g.pow((f.rank - 1 - axis) as u32);
        let total = values.len();
        for base in 0..total {
            // `base` is the start of a line iff its coordinate on `axis` is 0
            if !(base / stride).is_multiple_of(g) {
                continue;
            }
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = values[base + k * stride];
            }
            match &upsampler {
                None => step_branch_average(&line, m, &mut out_line),
                Some(up) => up.branch_average(&line, &mut out_line),
            }
            for (k, v) in out_line.iter().enumerate() {
                values[base + k * stride] = *v;
            }
        }
    }
    GridFunction::new(f.rank, g, values)
}

/// Output cell `k` pulls back to `m` sub-cells of width `2π/(mG)`, the `j`-th
/// inside input cell `⌊(k + jG)/m⌋`.
fn step_branch_average(line: &[f64], m: usize, out: &mut [f64]) {
    let g = line.len();
    for (k, slot) in out.iter_mut().enumerate() {
        let sum: f64 = (0..m).map(|j| line[(k + j * g) / m]).sum();
        *slot = sum / m as f64;
    }
}

struct SpectralUpsampler {
    g: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SpectralUpsampler {
    fn new(g: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            g,
            m,
            forward: planner.plan_fft_forward(g),
            inverse: planner.plan_fft_inverse(g * m),
        }
    }

    /// Evaluates the trigonometric interpolant on the refined grid of `mG`
    /// points, then averages the `m` preimages of every coarse grid point.
    fn branch_average(&self, line: &[f64], out: &mut [f64]) {
        let (g, m) = (self.g, self.m);
        let fine_len = g * m;
        let mut spectrum: Vec<Complex64> = line.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut spectrum);
        let mut fine = vec![Complex64::new(0.0, 0.0); fine_len];
        for (q, c) in spectrum.iter().enumerate() {
            if g % 2 == 0 && q == g / 2 {
                // split the Nyquist bin symmetrically so the interpolant is real
                fine[g / 2] += c * 0.5;
                fine[fine_len - g / 2] += c * 0.5;
            } else if q < g.div_ceil(2) {
                fine[q] += c;
            } else {
                fine[fine_len - (g - q)] += c;
            }
        }
        self.inverse.process(&mut fine);
        let scale = 1.0 / (g as f64 * m as f64);
        for (k, slot) in out.iter_mut().enumerate() {
            let sum: f64 = (0..m).map(|j| fine[k + j * g].re).sum();
            *slot = sum * scale;
        }
    }
}

/// A probability density on the grid against Lebesgue measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFunction", into = "GridFunction")]
pub struct GridDensity {
    inner: GridFunction,
}

impl TryFrom<GridFunction> for GridDensity {
    type Error = Error;

    fn try_from(f: GridFunction) -> Result<Self> {
        GridDensity::from_function(f)
    }
}

impl From<GridDensity> for GridFunction {
    fn from(d: GridDensity) -> Self {
        d.inner
    }
}

impl GridDensity {
    pub fn new(rank: usize, grid_size: usize, values: Vec<f64>) -> Result<Self> {
        Self::from_function(GridFunction::new(rank, grid_size, values)?)
    }

    pub fn from_function(f: GridFunction) -> Result<Self> {
        if let Some(min) = f.values.iter().copied().find(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::NotADensity { min });
        }
        let mass = f.integral();
        if (mass - 1.0).abs() > GRID_MASS_TOL {
            return Err(Error::InvalidInput(format!("grid density has mass {mass}")));
        }
        Ok(Self { inner: f })
    }

    pub fn uniform(rank: usize, grid_size: usize) -> Self {
        let v = TAU.powi(-(rank as i32));
        Self {
            inner: GridFunction {
                rank,
                grid_size,
                values: vec![v; grid_size.pow(rank as u32)],
            },
        }
    }

    pub fn as_function(&self) -> &GridFunction {
        &self.inner
    }

    pub fn rank(&self) -> usize {
        self.inner.rank
    }

    pub fn grid_size(&self) -> usize {
        self.inner.grid_size
    }

    pub fn values(&self) -> &[f64] {
        &self.inner.values
    }

    pub fn integral(&self) -> f64 {
        self.inner.integral()
    }

    /// Index of the cell containing `t` (cells are `[2πk/G, 2π(k+1)/G)`).
    fn cell_of(&self, t: &[f64]) -> usize {
        let g = self.grid_size();
        t.iter().fold(0, |acc, &x| {
            let k = ((x / TAU) * g as f64).floor() as usize;
            acc * g + k.min(g - 1)
        })
    }

    /// Density value of the step reconstruction at `t`.
    pub fn step_value(&self, t: &TorusPoint) -> f64 {
        self.values()[self.cell_of(t.angles())]
    }
}

/// Density of `m·X` for `X` distributed by `d`.
pub fn grid_pushforward(d: &GridDensity, m: u64, reconstruction: Reconstruction) -> Result<GridDensity> {
    let f = branch_average(&d.inner, m, reconstruction)?;
    let mut values = f.values;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -TAU_NEG {
                return Err(Error::NotADensity { min: *v });
            }
            *v = 0.0;
        }
    }
    GridDensity::new(d.rank(), d.grid_size(), values)
}

/// Draws `s` points: a cell chosen with probability proportional to its value,
/// then a uniform point inside the cell.
pub fn sample_grid<R: Rng + ?Sized>(d: &GridDensity, rng: &mut R, s: usize) -> AngleSample {
    let g = d.grid_size();
    let rank = d.rank();
    let mut cumulative = Vec::with_capacity(d.values().len());
    let mut acc = 0.0;
    for v in d.values() {
        acc += v;
        cumulative.push(acc);
    }
    let width = TAU / g as f64;
    let mut data = Vec::with_capacity(s * rank);
    let mut coords = vec![0usize; rank];
    for _ in 0..s {
        let u = rng.random::<f64>() * acc;
        let mut rest = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
        for slot in coords.iter_mut().rev() {
            *slot = rest % g;
            rest /= g;
        }
        for &k in &coords {
            let x = (k as f64 + rng.random::<f64>()) * width;
            data.push(if x >= TAU { 0.0 } else { x });
        }
    }
    AngleSample { rank, data }
}

/// `S` realizations of a random point of the torus, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleSample {
    rank: usize,
    data: Vec<f64>,
}

impl AngleSample {
    pub fn new(rank: usize, data: Vec<f64>) -> Result<Self> {
        if rank == 0 || !data.len().is_multiple_of(rank) {
            return Err(Error::InvalidInput("sample data is not a whole number of rows".into()));
        }
        if let Some(bad) = data.iter().find(|a| !(0.0..TAU).contains(*a)) {
            return Err(Error::InvalidInput(format!("angle {bad} outside [0, 2π)")));
        }
        Ok(Self { rank, data })
    }

    pub fn from_points<'a>(rank: usize, points: impl IntoIterator<Item = &'a TorusPoint>) -> Self {
        let mut data = Vec::new();
        for p in points {
            assert_eq!(p.rank(), rank);
            data.extend_from_slice(p.angles());
        }
        Self { rank, data }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.rank
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.rank)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// Entrywise `m·θ mod 2π`.
pub fn power_angles(a: &AngleSample, m: u64) -> Result<AngleSample> {
    if m == 0 {
        return Err(Error::Precondition("power needs m >= 1".into()));
    }
    Ok(AngleSample {
        rank: a.rank,
        data: a.data.iter().map(|&x| scaled_angle(x, m)).collect(),
    })
}

/// Uniform iid angles, the limit law of every absolutely continuous `m·X`.
pub fn uniform_sample<R: Rng + ?Sized>(rank: usize, rng: &mut R, s: usize) -> AngleSample {
    let data = (0..s * rank).map(|_| wrap_angle(rng.random::<f64>() * TAU)).collect();
    AngleSample { rank, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn density(rank: usize, terms: &[(&[i64], f64)]) -> FourierDensity {
        let coeffs = terms
            .iter()
            .map(|(p, c)| (p.to_vec(), Complex64::new(*c, 0.0)))
            .collect();
        FourierDensity::new(rank, coeffs).unwrap()
    }

    fn cosine_density() -> FourierDensity {
        density(1, &[(&[0], 1.0), (&[1], 0.5), (&[-1], 0.5)])
    }

    #[test]
    fn pushforward_examples() {
        let d = cosine_density();
        assert_eq!(fourier_pushforward(&d, 1).unwrap(), d);

        let d = density(1, &[(&[0], 1.0), (&[2], 0.3), (&[-2], 0.3)]);
        let pushed = fourier_pushforward(&d, 2).unwrap();
        assert_eq!(pushed, density(1, &[(&[0], 1.0), (&[1], 0.3), (&[-1], 0.3)]));

        let d = density(
            2,
            &[
                (&[0, 0], 1.0),
                (&[1, 0], 0.2),
                (&[-1, 0], 0.2),
                (&[0, 1], 0.2),
                (&[0, -1], 0.2),
            ],
        );
        assert_eq!(fourier_pushforward(&d, 2).unwrap(), FourierDensity::uniform(2));
    }

    #[test]
    fn coefficient_examples() {
        let u = FourierDensity::uniform(2);
        assert_eq!(fourier_coefficient(&u, &[3, -1]), Complex64::new(0.0, 0.0));
        assert_eq!(fourier_coefficient(&u, &[0, 0]), Complex64::new(1.0, 0.0));
        let d = density(2, &[(&[0, 0], 1.0), (&[2, 0], 0.3), (&[-2, 0], 0.3)]);
        let pushed = fourier_pushforward(&d, 2).unwrap();
        assert_eq!(fourier_coefficient(&pushed, &[1, 0]), Complex64::new(0.3, 0.0));
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(stationarity_threshold(&FourierDensity::uniform(3)), 1);
        let d = density(2, &[(&[0, 0], 1.0), (&[2, -1], 0.2), (&[-2, 1], 0.2)]);
        assert_eq!(stationarity_threshold(&d), 3);
        assert_eq!(exact_stationary_power(&d), 2);
        // U(2) Haar eigenangle density 1 - cos(θ1 - θ2)
        let weyl = density(2, &[(&[0, 0], 1.0), (&[1, -1], -0.5), (&[-1, 1], -0.5)]);
        assert_eq!(stationarity_threshold(&weyl), 2);
    }

    #[test]
    fn evaluate_examples() {
        let u = FourierDensity::uniform(2);
        assert_eq!(evaluate(&u, &TorusPoint::new(vec![1.0, 2.0]).unwrap()), 1.0);
        let d = cosine_density();
        assert!((evaluate(&d, &TorusPoint::new(vec![0.0]).unwrap()) - 2.0).abs() < 1e-15);
        assert!(evaluate(&d, &TorusPoint::new(vec![PI]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn to_grid_examples() {
        let g = to_grid(&FourierDensity::uniform(2), 8).unwrap();
        assert!(g.values().iter().all(|v| (v - 1.0 / (TAU * TAU)).abs() < 1e-15));

        let g = to_grid(&cosine_density(), 4).unwrap();
        let expected = [2.0, 1.0, 0.0, 1.0];
        for (v, e) in g.values().iter().zip(expected) {
            assert!((v - e / TAU).abs() < 1e-15);
        }
        assert!(to_grid(&cosine_density(), 2).is_err());
    }

    #[test]
    fn invalid_fourier_densities() {
        let mut c = BTreeMap::new();
        c.insert(vec![0], Complex64::new(0.5, 0.0));
        assert!(FourierDensity::new(1, c).is_err());

        let mut c = BTreeMap::new();
        c.insert(vec![0], Complex64::new(1.0, 0.0));
        c.insert(vec![1], Complex64::new(0.3, 0.0));
        assert!(FourierDensity::new(1, c).is_err(), "missing conjugate");

        let mut c = BTreeMap::new();
        c.insert(vec![0], Complex64::new(1.0, 0.0));
        c.insert(vec![1], Complex64::new(0.8, 0.0));
        c.insert(vec![-1], Complex64::new(0.8, 0.0));
        assert!(matches!(FourierDensity::new(1, c), Err(Error::NotADensity { .. })));
    }

    #[test]
    fn json_schema() {
        let d = cosine_density();
        let text = serde_json::to_string(&d).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["rank"], 1);
        assert_eq!(v["coeffs"][0]["p"], serde_json::json!([-1]));
        assert_eq!(v["coeffs"][0]["re"], 0.5);
        assert_eq!(v["coeffs"][0]["im"], 0.0);
        let back: FourierDensity = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);

        let bad = r#"{"rank": 1, "coeffs": [{"p": [0], "re": 2.0, "im": 0.0}]}"#;
        assert!(serde_json::from_str::<FourierDensity>(bad).is_err());

        let g = GridDensity::uniform(1, 4);
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.contains("\"grid_size\":4"));
        assert_eq!(serde_json::from_str::<GridDensity>(&text).unwrap(), g);
    }

    #[test]
    fn grid_pushforward_examples() {
        for rec in [Reconstruction::Step, Reconstruction::BandLimited] {
            let u = GridDensity::uniform(2, 12);
            let pushed = grid_pushforward(&u, 3, rec).unwrap();
            assert!(pushed.as_function().max_abs_diff(u.as_function()) < 1e-15);

            let (a, b) = (0.3 / PI, 0.7 / PI);
            let d = GridDensity::new(1, 2, vec![a, b]).unwrap();
            let pushed = grid_pushforward(&d, 2, rec).unwrap();
            for v in pushed.values() {
                assert!((v - (a + b) / 2.0).abs() < 1e-15, "{rec:?}");
            }

            let g = 64;
            let half: Vec<f64> = (0..g).map(|k| if k < g / 2 { 1.0 / PI } else { 0.0 }).collect();
            let d = GridDensity::new(1, g, half).unwrap();
            let pushed = grid_pushforward(&d, 2, rec).unwrap();
            for v in pushed.values() {
                assert!((v - 1.0 / TAU).abs() < 1e-12, "{rec:?}: {v}");
            }
        }
        let d = GridDensity::uniform(1, 10);
        assert!(grid_pushforward(&d, 3, Reconstruction::Step).is_err());
    }

    #[test]
    fn half_indicator_pushforward_matches_histogram() {
        // oracle: histogram of 2X mod 2π with X uniform on [0, π)
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bins = 32;
        let s = 1_000_000;
        let mut counts = vec![0u64; bins];
        for _ in 0..s {
            let x = rng.random::<f64>() * PI;
            let y = wrap_angle(2.0 * x);
            counts[((y / TAU) * bins as f64) as usize % bins] += 1;
        }
        let g = 64;
        let half: Vec<f64> = (0..g).map(|k| if k < g / 2 { 1.0 / PI } else { 0.0 }).collect();
        let d = GridDensity::new(1, g, half).unwrap();
        let pushed = grid_pushforward(&d, 2, Reconstruction::Step).unwrap();
        // predicted bin probabilities from the grid density
        let per_bin = g / bins;
        let chi2: f64 = (0..bins)
            .map(|b| {
                let p: f64 = pushed.values()[b * per_bin..(b + 1) * per_bin].iter().sum::<f64>() * TAU / g as f64;
                let e = p * s as f64;
                (counts[b] as f64 - e).powi(2) / e
            })
            .sum();
        // chi-square with 31 degrees of freedom: 99.9% quantile is about 61
        assert!(chi2 < 61.1, "chi2 = {chi2}");
    }

    #[test]
    fn band_limited_matches_fourier_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let d = FourierDensity::random(2, 3, &mut rng);
            for m in [2u64, 3, 4] {
                let via_fourier = to_grid(&fourier_pushforward(&d, m).unwrap(), 48).unwrap();
                let via_grid = grid_pushforward(&to_grid(&d, 48).unwrap(), m, Reconstruction::BandLimited).unwrap();
                let diff = via_fourier.as_function().max_abs_diff(via_grid.as_function());
                assert!(diff < 1e-12, "m={m}: {diff}");
            }
        }
    }

    #[test]
    fn odd_grid_band_limited() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let d = FourierDensity::random(1, 2, &mut rng);
        let via_fourier = to_grid(&fourier_pushforward(&d, 3).unwrap(), 15).unwrap();
        let via_grid = grid_pushforward(&to_grid(&d, 15).unwrap(), 3, Reconstruction::BandLimited).unwrap();
        assert!(via_fourier.as_function().max_abs_diff(via_grid.as_function()) < 1e-12);
    }

    #[test]
    fn sample_grid_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let g = 64;
        let half: Vec<f64> = (0..g).map(|k| if k < g / 2 { 1.0 / PI } else { 0.0 }).collect();
        let d = GridDensity::new(1, g, half).unwrap();
        let s = sample_grid(&d, &mut rng, 20_000);
        assert!(s.rows().all(|r| r[0] >= 0.0 && r[0] < PI));

        let mut point = vec![0.0; g];
        point[3] = 1.0;
        assert!(GridDensity::new(1, g, point).is_err());
    }

    #[test]
    fn sample_grid_uniform_passes_ks() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let s = 20_000;
        let a = sample_grid(&GridDensity::uniform(2, 16), &mut rng, s);
        for j in 0..2 {
            let ks = crate::stats::ks_uniform(&a.column(j)).unwrap();
            assert!(ks.pass, "axis {j}: {}", ks.scaled);
        }
    }

    #[test]
    fn grid_sampling_reproduces_fourier_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let d = density(
            1,
            &[(&[0], 1.0), (&[1], 0.3), (&[-1], 0.3), (&[2], 0.15), (&[-2], 0.15)],
        );
        let grid = to_grid(&d, 720).unwrap();
        let s = 100_000;
        let sample = sample_grid(&grid, &mut rng, s);
        for p in -3i64..=3 {
            let est = crate::stats::empirical_fourier(&sample, &[p]).unwrap();
            let target = fourier_coefficient(&d, &[p]);
            assert!(
                (est.estimate - target).norm() <= 5.0 * est.std_error.max(1.0 / (s as f64).sqrt()),
                "p={p}: {} vs {target}",
                est.estimate
            );
        }
    }

    #[test]
    fn rejection_sampler_matches_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let d = FourierDensity::random(2, 2, &mut rng);
        let s = 100_000;
        let sample = d.sample(&mut rng, s);
        for p in box_points(2, 3) {
            let est = crate::stats::empirical_fourier(&sample, &p).unwrap();
            let target = fourier_coefficient(&d, &p);
            assert!((est.estimate - target).norm() <= 5.0 / (s as f64).sqrt(), "p={p:?}");
        }
    }

    #[test]
    fn power_angles_examples() {
        let a = AngleSample::new(1, vec![PI, 1.0]).unwrap();
        assert_eq!(power_angles(&a, 1).unwrap(), a);
        let sq = power_angles(&a, 2).unwrap();
        assert!(sq.column(0)[0].abs() < 1e-15);
        assert!(AngleSample::new(2, vec![0.0, 1.0, 2.0]).is_err());
        assert!(AngleSample::new(1, vec![7.0]).is_err());
    }

    #[test]
    fn uniform_is_fixed_point() {
        for m in 1..20 {
            assert_eq!(
                fourier_pushforward(&FourierDensity::uniform(2), m).unwrap(),
                FourierDensity::uniform(2)
            );
        }
    }

    proptest! {
        #[test]
        fn pushforward_composes(seed in any::<u64>(), a in 1u64..6, b in 1u64..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = FourierDensity::random(2, 6, &mut rng);
            let lhs = fourier_pushforward(&d, a * b).unwrap();
            let rhs = fourier_pushforward(&fourier_pushforward(&d, a).unwrap(), b).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn pushforward_is_uniform_past_threshold(seed in any::<u64>(), extra in 0u64..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = FourierDensity::random(2, 3, &mut rng);
            let m = stationarity_threshold(&d) + extra;
            prop_assert_eq!(fourier_pushforward(&d, m).unwrap(), FourierDensity::uniform(2));
            prop_assert!(exact_stationary_power(&d) <= stationarity_threshold(&d));
        }

        #[test]
        fn step_pushforward_preserves_integral_and_contracts(
            values in proptest::collection::vec(-1.0f64..1.0, 36),
            m in prop::sample::select(vec![1u64, 2, 3, 6]),
        ) {
            let f = GridFunction::new(2, 6, values).unwrap();
            let r = branch_average(&f, m, Reconstruction::Step).unwrap();
            prop_assert!((r.integral() - f.integral()).abs() <= 1e-12);
            prop_assert!(r.l1_norm() <= f.l1_norm() + 1e-12);
        }
    }
}
