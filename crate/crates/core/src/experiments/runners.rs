use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::time::Instant;

use rand::Rng;

use super::config::{ExperimentConfig, ExperimentKind, PreimageConstruction, Reference};
use super::report::{ExperimentReport, PowerTable, ReportRow};
use crate::error::Result;
use crate::groups::{
    eigenangles, haar_sample, power, rains_limit_sample, Family, GroupDescriptor, GroupElement, TorusPoint, TAU_DRIFT,
};
use crate::linalg;
use crate::preimage::{limit_law_sample, preimage_sorted, preimage_uniform, Preimage};
use crate::samplers::{sample_mixture_limit, Law};
use crate::shard::{parallel_draws, shard_rng};
use crate::stats::{
    empirical_fourier, entry_moments, ks_verdict, modulus_bound_test, one_sample_test, trace_moments,
    trace_moments_from_angles, two_sample_test, MomentReport,
};
use crate::torus::{
    box_points, branch_average, exact_stationary_power, fourier_coefficient, fourier_pushforward, grid_pushforward,
    power_angles, stationarity_threshold, to_grid, AngleSample, FourierDensity, GridFunction, LatticePoint,
    Reconstruction,
};

/// Tolerance of the grid operator against the Fourier route.
pub const TAU_ORACLE: f64 = 1e-9;
/// Tolerance of the exact grid properties.
pub const TAU_EXACT: f64 = 1e-12;
/// Cells of the no-atoms check and the allowed multiple of the uniform mass.
const ATOM_CELLS: usize = 100;
const ATOM_FACTOR: f64 = 10.0;

const LAW_STREAM: u64 = 0;
const REFERENCE_STREAM: u64 = 1;
const SECOND_STREAM: u64 = 2;
const DENSITY_STREAM: u64 = 3;
const SIGNED_STREAM: u64 = 4;

fn purpose(stream: u64, index: usize) -> u64 {
    stream + 8 * index as u64
}

/// Runs one experiment after validating its config.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let mut report = match config.kind {
        ExperimentKind::NegativeControl => {
            let inner = run_kind(config, config.effective_kind())?;
            let detected = ReportRow::flag(format!("{}_failed", inner.experiment), !inner.pass);
            let mut report = ExperimentReport::new(
                config,
                vec![PowerTable {
                    m: 0,
                    rows: vec![detected],
                }],
                vec![format!("passes iff the wrapped {} experiment fails", inner.experiment)],
            );
            report.inner = Some(Box::new(inner));
            report
        }
        kind => run_kind(config, kind)?,
    };
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn run_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<ExperimentReport> {
    let mut report = match kind {
        ExperimentKind::EigenConvergence => run_eigen_convergence(config),
        ExperimentKind::GroupLimit => run_group_limit(config),
        ExperimentKind::ExactThreshold => run_exact_threshold(config),
        ExperimentKind::PreimageInvariance => run_preimage_invariance(config),
        ExperimentKind::TorusSuite => run_torus_suite(config),
        ExperimentKind::NegativeControl => unreachable!("validated"),
    }?;
    report.experiment = kind.name().to_string();
    Ok(report)
}

fn two_sample_rows(a: &[MomentReport], b: &[MomentReport], threshold: f64) -> Result<Vec<ReportRow>> {
    let verdicts = two_sample_test(a, b, threshold)?;
    Ok(verdicts
        .iter()
        .enumerate()
        .map(|(i, v)| ReportRow::from_verdict(v, &a[i / 2]))
        .collect())
}

fn nonzero_box(rank: usize, degree: i64) -> Vec<LatticePoint> {
    box_points(rank, degree)
        .into_iter()
        .filter(|p| p.iter().any(|x| *x != 0))
        .collect()
}

/// `|p_j| ≤ degree`, `p ≠ 0`: `|estimate| · √S` against `threshold`.
fn uniform_fourier_rows(sample: &AngleSample, degree: i64, threshold: f64) -> Result<Vec<ReportRow>> {
    nonzero_box(sample.rank(), degree)
        .iter()
        .map(|p| {
            let r = empirical_fourier(sample, p)?;
            Ok(ReportRow::from_verdict(&modulus_bound_test(&r, threshold), &r))
        })
        .collect()
}

/// Componentwise z-tests of empirical coefficients against exact ones.
fn exact_fourier_rows(
    sample: &AngleSample,
    exact: &FourierDensity,
    degree: i64,
    threshold: f64,
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for p in nonzero_box(sample.rank(), degree) {
        let r = empirical_fourier(sample, &p)?;
        for v in one_sample_test(&r, fourier_coefficient(exact, &p), threshold) {
            rows.push(ReportRow::from_verdict(&v, &r));
        }
    }
    Ok(rows)
}

fn ks_rows(sample: &AngleSample) -> Result<Vec<ReportRow>> {
    (0..sample.rank())
        .map(|j| {
            let v = ks_verdict(format!("ks_theta{}", j + 1), &sample.column(j))?;
            let report = MomentReport {
                id: v.id.clone(),
                estimate: num_complex::Complex64::new(v.z_score, 0.0),
                std_error: 0.0,
                std_error_re: 0.0,
                std_error_im: 0.0,
                sample_size: sample.len(),
            };
            Ok(ReportRow::from_verdict(&v, &report))
        })
        .collect()
}

/// Distance from the nearest eigenvalue to 1.
fn eigenvalue_one_gap(g: &GroupElement) -> Result<f64> {
    let d = eigenangles(g)?
        .into_iter()
        .map(|a| linalg::circular_distance(a, 0.0))
        .fold(f64::INFINITY, f64::min);
    Ok(2.0 * (d / 2.0).sin())
}

struct PoweredDraw {
    element: GroupElement,
    torus: Option<TorusPoint>,
    one_gap: f64,
}

/// Eigenvalues of `U^m` against the frozen law of `H^D`: trace moments for
/// every family, plus Fourier coefficients and KS tests of the uniform
/// preimage's torus part when the law has a density, plus the determinant
/// identity for `SU` and the fixed eigenvalue for `SO`.
pub fn run_eigen_convergence(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let desc = config.descriptor()?;
    let law = config.law()?;
    let with_torus = law.has_torus_density();
    let mut notes = Vec::new();
    if !with_torus {
        notes.push("law has atoms, so torus-part statistics are skipped".to_string());
    }
    let mut tables = Vec::new();
    for (i, &m) in config.powers.iter().enumerate() {
        let draws = parallel_draws(config.seed, purpose(LAW_STREAM, i), config.samples, |rng| {
            let element = power(&law.sample(rng)?, m)?;
            let torus = if with_torus {
                Some(preimage_uniform(&element, rng)?.torus)
            } else {
                None
            };
            let one_gap = if desc.family() == Family::SpecialOrthogonalOdd {
                eigenvalue_one_gap(&element)?
            } else {
                0.0
            };
            Ok(PoweredDraw {
                element,
                torus,
                one_gap,
            })
        })?;
        let limit = parallel_draws(config.seed, purpose(REFERENCE_STREAM, i), config.samples, |rng| {
            Ok(rains_limit_sample(&desc, rng))
        })?;

        let elements: Vec<GroupElement> = draws.iter().map(|d| d.element.clone()).collect();
        let mut rows = two_sample_rows(
            &trace_moments(&elements, config.trace_k_max)?,
            &trace_moments_from_angles(&limit, config.trace_k_max)?,
            config.threshold,
        )?;
        if with_torus {
            let sample = AngleSample::from_points(desc.torus_rank(), draws.iter().filter_map(|d| d.torus.as_ref()));
            rows.extend(uniform_fourier_rows(&sample, config.lattice_max, config.threshold)?);
            rows.extend(ks_rows(&sample)?);
        }
        match desc.family() {
            Family::SpecialUnitaryN => {
                let worst = elements
                    .iter()
                    .map(|g| (g.matrix().determinant() - num_complex::Complex64::new(1.0, 0.0)).norm())
                    .fold(0.0, f64::max);
                rows.push(ReportRow::exact("det_minus_one", worst, TAU_DRIFT));
            }
            Family::SpecialOrthogonalOdd => {
                let worst = draws.iter().map(|d| d.one_gap).fold(0.0, f64::max);
                rows.push(ReportRow::exact("eigenvalue_one_distance", worst, TAU_DRIFT));
            }
            Family::UnitaryN => {}
        }
        tables.push(PowerTable { m, rows });
    }
    Ok(ExperimentReport::new(config, tables, notes))
}

fn full_moments(samples: &[GroupElement], k_max: u32) -> Result<Vec<MomentReport>> {
    let mut out = entry_moments(samples)?;
    out.extend(trace_moments(samples, k_max)?);
    Ok(out)
}

/// `U^m` against a reference law through entry and trace moments.
pub fn run_group_limit(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let desc = config.descriptor()?;
    let law = config.law()?;
    let d = desc.stationarity_exponent() as u64;
    let notes = vec![match config.reference {
        Reference::PreimageLimit => "reference: psi(flag, Y) over uniform preimages of fresh draws".to_string(),
        Reference::ExplicitMixture => "reference: X Y + (1 - X) a Y a*".to_string(),
        Reference::HaarPower => format!("reference: H^{d} with H Haar"),
    }];
    let mut tables = Vec::new();
    for (i, &m) in config.powers.iter().enumerate() {
        let powered = parallel_draws(config.seed, purpose(LAW_STREAM, i), config.samples, |rng| {
            power(&law.sample(rng)?, m)
        })?;
        let reference = parallel_draws(config.seed, purpose(REFERENCE_STREAM, i), config.samples, |rng| match (
            config.reference,
            &law,
        ) {
            (Reference::ExplicitMixture, Law::MixtureU2(l)) => Ok(sample_mixture_limit(l, rng)),
            (Reference::HaarPower, _) => haar_power_sample(&desc, rng),
            _ => {
                let pre = preimage_uniform(&law.sample(rng)?, rng)?;
                Ok(limit_law_sample(&pre, rng))
            }
        })?;
        let rows = two_sample_rows(
            &full_moments(&powered, config.trace_k_max)?,
            &full_moments(&reference, config.trace_k_max)?,
            config.threshold,
        )?;
        tables.push(PowerTable { m, rows });
    }
    Ok(ExperimentReport::new(config, tables, notes))
}

/// The point of `exact` with the largest nonzero coefficient in the box, or,
/// if every nonzero coefficient vanishes there, the lowest-degree nonzero
/// point of `density`.
fn designated_coefficient(density: &FourierDensity, exact: &FourierDensity, degree: i64) -> (LatticePoint, bool) {
    let best = nonzero_box(density.rank(), degree)
        .into_iter()
        .map(|p| {
            let c = fourier_coefficient(exact, &p).norm();
            (p, c)
        })
        .filter(|(_, c)| *c > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1));
    match best {
        Some((p, _)) => (p, true),
        None => {
            let p = density
                .coefficients()
                .keys()
                .filter(|p| p.iter().any(|x| *x != 0))
                .min_by_key(|p| p.iter().map(|x| x.abs()).max())
                .cloned()
                .unwrap_or_else(|| vec![1; density.rank()]);
            (p, false)
        }
    }
}

/// Symbolic threshold `M + 1` of the uniform-preimage torus density, checked
/// statistically: coefficients match the exact pushforward at every power,
/// the trace law matches the frozen law from `M + 1` on, and a nonzero
/// coefficient is detected at `M`.
pub fn run_exact_threshold(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let desc = config.descriptor()?;
    let law = config.law()?;
    let density = law.symbolic_eigen_density()?;
    let threshold = stationarity_threshold(&density);
    let exact_power = exact_stationary_power(&density);
    let below = threshold - 1;
    let mut notes = vec![
        format!("symbolic threshold M + 1 = {threshold}"),
        format!("smallest power with exactly uniform pushforward = {exact_power}"),
    ];
    let mut powers: BTreeSet<u64> = config.powers.iter().copied().collect();
    powers.insert(threshold);
    if below >= 1 {
        powers.insert(below);
    } else {
        notes.push("density is uniform, no power below the threshold".into());
    }
    let mut tables = Vec::new();
    for (i, &m) in powers.iter().enumerate() {
        let draws = parallel_draws(config.seed, purpose(LAW_STREAM, i), config.samples, |rng| {
            let element = power(&law.sample(rng)?, m)?;
            let torus = preimage_uniform(&element, rng)?.torus;
            Ok((element, torus))
        })?;
        let sample = AngleSample::from_points(desc.torus_rank(), draws.iter().map(|d| &d.1));
        let exact = fourier_pushforward(&density, m)?;
        let mut rows = exact_fourier_rows(&sample, &exact, config.lattice_max, config.threshold)?;
        if m >= threshold {
            let elements: Vec<GroupElement> = draws.iter().map(|d| d.0.clone()).collect();
            let limit = parallel_draws(config.seed, purpose(REFERENCE_STREAM, i), config.samples, |rng| {
                Ok(rains_limit_sample(&desc, rng))
            })?;
            rows.extend(two_sample_rows(
                &trace_moments(&elements, config.trace_k_max)?,
                &trace_moments_from_angles(&limit, config.trace_k_max)?,
                config.threshold,
            )?);
        }
        if m == below {
            let (p, nonzero) = designated_coefficient(&density, &exact, config.lattice_max);
            if !nonzero {
                notes.push(format!(
                    "pushforward at m = {m} has no nonzero coefficient with |p_j| <= {}; \
                     detection row uses {p:?}, whose coefficient is zero at this power",
                    config.lattice_max
                ));
            }
            let r = empirical_fourier(&sample, &p)?;
            let mut v = modulus_bound_test(&r, config.threshold);
            v.id = format!("detect:{}", v.id);
            rows.push(ReportRow::detect(&v, &r));
        }
        tables.push(PowerTable { m, rows });
    }
    Ok(ExperimentReport::new(config, tables, notes))
}

fn construct<R: Rng + ?Sized>(how: PreimageConstruction, u: &GroupElement, rng: &mut R) -> Result<Preimage> {
    match how {
        PreimageConstruction::Sorted => preimage_sorted(u),
        PreimageConstruction::Uniform => preimage_uniform(u, rng),
    }
}

fn no_atom_rows(label: &str, sample: &AngleSample) -> Vec<ReportRow> {
    (0..sample.rank())
        .map(|j| {
            let mut cells = vec![0usize; ATOM_CELLS];
            for x in sample.column(j) {
                cells[((x / TAU * ATOM_CELLS as f64) as usize).min(ATOM_CELLS - 1)] += 1;
            }
            let max_mass = *cells.iter().max().expect("cells") as f64 / sample.len() as f64;
            ReportRow::exact(
                format!("max_cell_mass:{label}:theta{}", j + 1),
                max_mass,
                ATOM_FACTOR / ATOM_CELLS as f64,
            )
        })
        .collect()
}

/// `ψ(flag, Y)` built from two preimage constructions of independent draws
/// of `U^m`, compared through entry and trace moments.
pub fn run_preimage_invariance(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let desc = config.descriptor()?;
    let law = config.law()?;
    let pair = config.preimages;
    let notes = vec![format!("constructions: {:?} vs {:?}", pair.first, pair.second)];
    let mut tables = Vec::new();
    for (i, &m) in config.powers.iter().enumerate() {
        let build = |stream: u64, how: PreimageConstruction| {
            parallel_draws(config.seed, purpose(stream, i), config.samples, |rng| {
                let u = power(&law.sample(rng)?, m)?;
                let pre = construct(how, &u, rng)?;
                Ok((limit_law_sample(&pre, rng), pre.torus))
            })
        };
        let first = build(LAW_STREAM, pair.first)?;
        let second = build(SECOND_STREAM, pair.second)?;
        let split = |draws: &[(GroupElement, TorusPoint)]| {
            let elements: Vec<GroupElement> = draws.iter().map(|d| d.0.clone()).collect();
            let sample = AngleSample::from_points(desc.torus_rank(), draws.iter().map(|d| &d.1));
            (elements, sample)
        };
        let (a, ta) = split(&first);
        let (b, tb) = split(&second);
        let mut rows = two_sample_rows(
            &full_moments(&a, config.trace_k_max)?,
            &full_moments(&b, config.trace_k_max)?,
            config.threshold,
        )?;
        rows.extend(no_atom_rows("first", &ta));
        rows.extend(no_atom_rows("second", &tb));
        tables.push(PowerTable { m, rows });
    }
    Ok(ExperimentReport::new(config, tables, notes))
}

fn random_signed_function<R: Rng + ?Sized>(rank: usize, grid_size: usize, rng: &mut R) -> Result<GridFunction> {
    let len = grid_size.pow(rank as u32);
    let values = (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    GridFunction::new(rank, grid_size, values)
}

/// Exact grid checks at `torus.exact_powers` (table `m` per power) and, for
/// every configured power, empirical coefficients of `m·θ` under a random
/// density against the exact pushforward.
pub fn run_torus_suite(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let suite = &config.torus;
    let g = suite.grid_size;
    let mut rng = shard_rng(config.seed, DENSITY_STREAM, 0);
    let densities: Vec<FourierDensity> = (0..suite.densities)
        .map(|_| FourierDensity::random(suite.rank, suite.degree, &mut rng))
        .collect();
    let grids = densities.iter().map(|d| to_grid(d, g)).collect::<Result<Vec<_>>>()?;

    let mut signed_rng = shard_rng(config.seed, SIGNED_STREAM, 0);
    let mut signed: Vec<Vec<GridFunction>> = vec![Vec::new(); suite.exact_powers.len()];
    for trial in 0..suite.signed_trials {
        signed[trial % suite.exact_powers.len()].push(random_signed_function(suite.rank, g, &mut signed_rng)?);
    }

    let mut tables = Vec::new();
    for (k, &m) in suite.exact_powers.iter().enumerate() {
        let mut oracle: f64 = 0.0;
        let mut density_drift: f64 = 0.0;
        for (d, grid) in densities.iter().zip(&grids) {
            let via_grid = grid_pushforward(grid, m, Reconstruction::BandLimited)?;
            let via_fourier = to_grid(&fourier_pushforward(d, m)?, g)?;
            oracle = oracle.max(via_grid.as_function().max_abs_diff(via_fourier.as_function()));
            let step = grid_pushforward(grid, m, Reconstruction::Step)?;
            density_drift = density_drift.max((step.integral() - grid.integral()).abs());
        }
        let mut signed_drift: f64 = 0.0;
        let mut l1_excess: f64 = 0.0;
        for f in &signed[k] {
            let r = branch_average(f, m, Reconstruction::Step)?;
            signed_drift = signed_drift.max((r.integral() - f.integral()).abs());
            l1_excess = l1_excess.max(r.l1_norm() - f.l1_norm());
        }
        tables.push(PowerTable {
            m,
            rows: vec![
                ReportRow::exact("oracle_max_abs_diff", oracle, TAU_ORACLE),
                ReportRow::exact("density_integral_drift", density_drift, TAU_EXACT),
                ReportRow::exact("signed_integral_drift", signed_drift, TAU_EXACT),
                ReportRow::exact("l1_contraction_excess", l1_excess.max(0.0), TAU_EXACT),
            ],
        });
    }

    let mut notes = vec![format!(
        "{} random densities of degree {} on a {}-torus, grid {g}",
        suite.densities, suite.degree, suite.rank
    )];
    if let Some(d) = densities.first() {
        notes.push(format!(
            "statistical checks use the first density, stationarity threshold {}",
            stationarity_threshold(d)
        ));
        let base = parallel_draws(config.seed, purpose(LAW_STREAM, 0), config.samples, |rng| {
            Ok(d.sample_point(rng))
        })?;
        let base = AngleSample::from_points(suite.rank, base.iter());
        for &m in &config.powers {
            let sample = power_angles(&base, m)?;
            let exact = fourier_pushforward(d, m)?;
            let rows = exact_fourier_rows(&sample, &exact, config.lattice_max, config.threshold)?;
            match tables.iter_mut().find(|t| t.m == m) {
                Some(t) => t.rows.extend(rows),
                None => tables.push(PowerTable { m, rows }),
            }
        }
    }
    Ok(ExperimentReport::new(config, tables, notes))
}

/// `H^D` with `H` Haar.
pub fn haar_power_sample<R: Rng + ?Sized>(desc: &GroupDescriptor, rng: &mut R) -> Result<GroupElement> {
    power(&haar_sample(desc, rng)?, desc.stationarity_exponent() as u64)
}
