//! Estimators and tests: empirical Fourier coefficients, trace and entry
//! moments, two-sample z-tests and the Kolmogorov-Smirnov uniformity test.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::GroupElement;
use crate::linalg::{self, CMatrix};
use crate::torus::AngleSample;

/// Default two-sided z threshold.
pub const DEFAULT_THRESHOLD: f64 = 5.0;
/// `√S · D` critical value of the KS test at the 1% level.
pub const KS_CRITICAL_1PCT: f64 = 1.63;

/// Sample mean of a complex statistic with plug-in standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MomentRow", from = "MomentRow")]
pub struct MomentReport {
    pub id: String,
    pub estimate: Complex64,
    /// Standard error of the complex mean, `sqrt((var re + var im) / S)`.
    pub std_error: f64,
    pub std_error_re: f64,
    pub std_error_im: f64,
    pub sample_size: usize,
}

#[derive(Serialize, Deserialize)]
struct MomentRow {
    id: String,
    re: f64,
    im: f64,
    se: f64,
    #[serde(rename = "S")]
    sample_size: usize,
    se_re: f64,
    se_im: f64,
}

impl From<MomentReport> for MomentRow {
    fn from(r: MomentReport) -> Self {
        Self {
            id: r.id,
            re: r.estimate.re,
            im: r.estimate.im,
            se: r.std_error,
            sample_size: r.sample_size,
            se_re: r.std_error_re,
            se_im: r.std_error_im,
        }
    }
}

impl From<MomentRow> for MomentReport {
    fn from(r: MomentRow) -> Self {
        Self {
            id: r.id,
            estimate: Complex64::new(r.re, r.im),
            std_error: r.se,
            std_error_re: r.se_re,
            std_error_im: r.se_im,
            sample_size: r.sample_size,
        }
    }
}

impl MomentReport {
    /// Mean and standard errors of `values`. Needs at least two values.
    pub fn from_values(id: impl Into<String>, values: impl IntoIterator<Item = Complex64>) -> Result<Self> {
        let values: Vec<Complex64> = values.into_iter().collect();
        let s = values.len();
        if s < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 samples, got {s}")));
        }
        let n = s as f64;
        let mean = values.iter().sum::<Complex64>() / n;
        let (mut var_re, mut var_im) = (0.0, 0.0);
        for v in &values {
            var_re += (v.re - mean.re).powi(2);
            var_im += (v.im - mean.im).powi(2);
        }
        var_re /= n - 1.0;
        var_im /= n - 1.0;
        Ok(Self {
            id: id.into(),
            estimate: mean,
            std_error: ((var_re + var_im) / n).sqrt(),
            std_error_re: (var_re / n).sqrt(),
            std_error_im: (var_im / n).sqrt(),
            sample_size: s,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub id: String,
    #[serde(rename = "z")]
    pub z_score: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl TestVerdict {
    pub fn new(id: impl Into<String>, z_score: f64, threshold: f64) -> Self {
        Self {
            id: id.into(),
            z_score,
            threshold,
            pass: z_score.abs() <= threshold,
        }
    }
}

/// `mean_s exp(-i p·θ_s)`, an estimate of `ν̂(p)` (the stored series
/// coefficient `a_p` of the sampled density).
pub fn empirical_fourier(a: &AngleSample, p: &[i64]) -> Result<MomentReport> {
    if p.len() != a.rank() {
        return Err(Error::InvalidInput(format!(
            "lattice point of rank {} for sample of rank {}",
            p.len(),
            a.rank()
        )));
    }
    let values = a.rows().map(|row| {
        let phase: f64 = row.iter().zip(p).map(|(t, &k)| k as f64 * t).sum();
        Complex64::from_polar(1.0, -phase)
    });
    MomentReport::from_values(format!("fourier{p:?}"), values)
}

/// Reports for `Re Tr(g^k)`, `Im Tr(g^k)` and `|Tr(g^k)|²`, `k = 1..=k_max`.
pub fn trace_moments(samples: &[GroupElement], k_max: u32) -> Result<Vec<MomentReport>> {
    let traces: Vec<Vec<Complex64>> = samples
        .iter()
        .map(|g| {
            let mut out = Vec::with_capacity(k_max as usize);
            let mut acc: Option<CMatrix> = None;
            for _ in 0..k_max {
                let next = match acc {
                    None => g.matrix().clone(),
                    Some(prev) => prev * g.matrix(),
                };
                out.push(linalg::trace(&next));
                acc = Some(next);
            }
            out
        })
        .collect();
    trace_reports(&traces, k_max)
}

/// Same statistics as [`trace_moments`] computed from eigenangle multisets
/// (`Tr g^k = Σ_j e^{i k θ_j}`).
pub fn trace_moments_from_angles(spectra: &[Vec<f64>], k_max: u32) -> Result<Vec<MomentReport>> {
    let traces: Vec<Vec<Complex64>> = spectra
        .iter()
        .map(|angles| {
            (1..=k_max)
                .map(|k| angles.iter().map(|a| Complex64::from_polar(1.0, k as f64 * a)).sum())
                .collect()
        })
        .collect();
    trace_reports(&traces, k_max)
}

fn trace_reports(traces: &[Vec<Complex64>], k_max: u32) -> Result<Vec<MomentReport>> {
    let mut out = Vec::with_capacity(3 * k_max as usize);
    for k in 0..k_max as usize {
        let col = || traces.iter().map(move |t| t[k]);
        let p = k + 1;
        out.push(MomentReport::from_values(
            format!("re_tr{p}"),
            col().map(|z| Complex64::new(z.re, 0.0)),
        )?);
        out.push(MomentReport::from_values(
            format!("im_tr{p}"),
            col().map(|z| Complex64::new(z.im, 0.0)),
        )?);
        out.push(MomentReport::from_values(
            format!("abs2_tr{p}"),
            col().map(|z| Complex64::new(z.norm_sqr(), 0.0)),
        )?);
    }
    Ok(out)
}

/// Index pairs `((j,k),(l,m))` used for second moments `E[g_jk conj(g_lm)]`.
/// For `N ≤ 2` every unordered pair of entries; otherwise every `|g_jk|²`
/// plus all pairs within the first row and within the first column.
pub fn second_moment_schedule(n: usize) -> Vec<((usize, usize), (usize, usize))> {
    let entries: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..n).map(move |k| (j, k))).collect();
    let mut out = Vec::new();
    if n <= 2 {
        for (a, x) in entries.iter().enumerate() {
            for y in &entries[a..] {
                out.push((*x, *y));
            }
        }
        return out;
    }
    for e in &entries {
        out.push((*e, *e));
    }
    for a in 0..n {
        for b in a + 1..n {
            out.push(((0, a), (0, b)));
            out.push(((a, 0), (b, 0)));
        }
    }
    out
}

/// All first moments `E[g_jk]` and the second moments of
/// [`second_moment_schedule`]. Identifiers use 1-based indices.
pub fn entry_moments(samples: &[GroupElement]) -> Result<Vec<MomentReport>> {
    let n = samples
        .first()
        .map(|g| g.descriptor().matrix_size())
        .ok_or_else(|| Error::InvalidInput("no samples".into()))?;
    let mut out = Vec::new();
    for j in 0..n {
        for k in 0..n {
            out.push(MomentReport::from_values(
                format!("g{}{}", j + 1, k + 1),
                samples.iter().map(|g| g.matrix()[(j, k)]),
            )?);
        }
    }
    for ((j, k), (l, m)) in second_moment_schedule(n) {
        out.push(MomentReport::from_values(
            format!("g{}{}*conj(g{}{})", j + 1, k + 1, l + 1, m + 1),
            samples.iter().map(|g| g.matrix()[(j, k)] * g.matrix()[(l, m)].conj()),
        )?);
    }
    Ok(out)
}

fn z_component(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-12 {
        0.0
    } else {
        f64::MAX.copysign(diff)
    }
}

/// Componentwise two-sample z-tests, `z = (a - b) / sqrt(se_a² + se_b²)`, on
/// real and imaginary parts. Reports must carry the same ids in the same order.
pub fn two_sample_test(
    reports_a: &[MomentReport],
    reports_b: &[MomentReport],
    threshold: f64,
) -> Result<Vec<TestVerdict>> {
    if reports_a.len() != reports_b.len() {
        return Err(Error::StatisticMismatch(format!(
            "{} vs {} statistics",
            reports_a.len(),
            reports_b.len()
        )));
    }
    let mut out = Vec::with_capacity(2 * reports_a.len());
    for (a, b) in reports_a.iter().zip(reports_b) {
        if a.id != b.id {
            return Err(Error::StatisticMismatch(format!("{} vs {}", a.id, b.id)));
        }
        let d = a.estimate - b.estimate;
        let se_re = a.std_error_re.hypot(b.std_error_re);
        let se_im = a.std_error_im.hypot(b.std_error_im);
        out.push(TestVerdict::new(
            format!("{}.re", a.id),
            z_component(d.re, se_re),
            threshold,
        ));
        out.push(TestVerdict::new(
            format!("{}.im", a.id),
            z_component(d.im, se_im),
            threshold,
        ));
    }
    Ok(out)
}

/// One-sample z-tests of a report against a known value.
pub fn one_sample_test(report: &MomentReport, target: Complex64, threshold: f64) -> [TestVerdict; 2] {
    let d = report.estimate - target;
    [
        TestVerdict::new(
            format!("{}.re", report.id),
            z_component(d.re, report.std_error_re),
            threshold,
        ),
        TestVerdict::new(
            format!("{}.im", report.id),
            z_component(d.im, report.std_error_im),
            threshold,
        ),
    ]
}

/// `|estimate| · √S`: passes iff the modulus is at most `threshold/√S`, the
/// bound for a coefficient whose true value is 0 under a unit-variance limit.
pub fn modulus_bound_test(report: &MomentReport, threshold: f64) -> TestVerdict {
    let z = report.estimate.norm() * (report.sample_size as f64).sqrt();
    TestVerdict::new(format!("{}.abs", report.id), z, threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// `sup |F_S - F|`.
    pub statistic: f64,
    /// `√S · statistic`.
    pub scaled: f64,
    pub pass: bool,
}

/// Kolmogorov-Smirnov distance of a sample from the uniform law on `[0, 2π)`.
pub fn ks_uniform(angles: &[f64]) -> Result<KsResult> {
    let s = angles.len();
    if s < 50 {
        return Err(Error::InvalidInput(format!(
            "KS test needs at least 50 samples, got {s}"
        )));
    }
    let mut sorted = angles.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = s as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = (x / TAU).clamp(0.0, 1.0);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let scaled = statistic * n.sqrt();
    Ok(KsResult {
        statistic,
        scaled,
        pass: scaled <= KS_CRITICAL_1PCT,
    })
}

pub fn ks_verdict(id: impl Into<String>, angles: &[f64]) -> Result<TestVerdict> {
    let ks = ks_uniform(angles)?;
    Ok(TestVerdict::new(id, ks.scaled, KS_CRITICAL_1PCT))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{haar_sample, GroupDescriptor};
    use crate::torus::uniform_sample;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn fourier_examples() {
        let zeros = AngleSample::new(2, vec![0.0; 20]).unwrap();
        let r = empirical_fourier(&zeros, &[1, 0]).unwrap();
        assert_eq!(r.estimate, Complex64::new(1.0, 0.0));
        assert_eq!(r.std_error, 0.0);

        let mut g = rng(1);
        let s = 100_000;
        let a = uniform_sample(2, &mut g, s);
        assert_eq!(
            empirical_fourier(&a, &[0, 0]).unwrap().estimate,
            Complex64::new(1.0, 0.0)
        );
        let r = empirical_fourier(&a, &[2, 1]).unwrap();
        assert!(r.estimate.norm() <= 5.0 / (s as f64).sqrt());

        let one = AngleSample::new(1, vec![0.3]).unwrap();
        assert!(empirical_fourier(&one, &[1]).is_err());
        assert!(empirical_fourier(&zeros, &[1]).is_err());
    }

    #[test]
    fn trace_examples() {
        let u3 = GroupDescriptor::unitary(3).unwrap();
        let ids = vec![u3.identity(); 10];
        let r = trace_moments(&ids, 1).unwrap();
        assert_eq!(r[0].id, "re_tr1");
        assert_eq!(r[0].estimate.re, 3.0);

        let mut g = rng(2);
        let so3 = GroupDescriptor::special_orthogonal(3).unwrap();
        let samples: Vec<_> = (0..200).map(|_| haar_sample(&so3, &mut g).unwrap()).collect();
        let r = trace_moments(&samples, 3).unwrap();
        for report in r.iter().filter(|r| r.id.starts_with("im_tr")) {
            assert_eq!(report.estimate, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn haar_u2_trace_second_moment() {
        // oracle: the same statistic from a 10x larger independent Haar run
        let u2 = GroupDescriptor::unitary(2).unwrap();
        let mut g = rng(3);
        let small: Vec<_> = (0..20_000).map(|_| haar_sample(&u2, &mut g).unwrap()).collect();
        let large: Vec<_> = (0..200_000).map(|_| haar_sample(&u2, &mut g).unwrap()).collect();
        let a = &trace_moments(&small, 1).unwrap()[2];
        let b = &trace_moments(&large, 1).unwrap()[2];
        assert_eq!(a.id, "abs2_tr1");
        let z = (a.estimate.re - b.estimate.re) / a.std_error_re.hypot(b.std_error_re);
        assert!(z.abs() < 5.0);
        assert!((b.estimate.re - 1.0).abs() < 5.0 * b.std_error_re);
    }

    #[test]
    fn angle_traces_match_matrix_traces() {
        let u3 = GroupDescriptor::unitary(3).unwrap();
        let mut g = rng(4);
        let samples: Vec<_> = (0..50).map(|_| haar_sample(&u3, &mut g).unwrap()).collect();
        let spectra: Vec<_> = samples.iter().map(|s| crate::groups::eigenangles(s).unwrap()).collect();
        let a = trace_moments(&samples, 3).unwrap();
        let b = trace_moments_from_angles(&spectra, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.id, y.id);
            assert!((x.estimate - y.estimate).norm() < 1e-10);
        }
    }

    #[test]
    fn entry_examples() {
        let u2 = GroupDescriptor::unitary(2).unwrap();
        let r = entry_moments(&vec![u2.identity(); 5]).unwrap();
        assert_eq!(r[0].id, "g11");
        assert_eq!(r[0].estimate, Complex64::new(1.0, 0.0));
        assert_eq!(r.len(), 4 + 10);

        let mut g = rng(5);
        let s = 100_000;
        let samples: Vec<_> = (0..s).map(|_| haar_sample(&u2, &mut g).unwrap()).collect();
        let r = entry_moments(&samples).unwrap();
        for first in &r[..4] {
            for v in one_sample_test(first, Complex64::new(0.0, 0.0), 5.0) {
                assert!(v.pass, "{v:?}");
            }
        }
        let g11 = r.iter().find(|m| m.id == "g11*conj(g11)").unwrap();
        assert!((g11.estimate.re - 0.5).abs() <= 5.0 * g11.std_error_re);
    }

    #[test]
    fn weingarten_oracle_by_sphere_sampling() {
        // first column of a Haar unitary is uniform on the unit sphere of C^2
        let mut g = rng(6);
        let s = 200_000;
        let vals = (0..s).map(|_| {
            let v: Vec<f64> = (0..4).map(|_| g.sample(rand_distr::StandardNormal)).collect();
            let norm2: f64 = v.iter().map(|x| x * x).sum();
            Complex64::new((v[0] * v[0] + v[1] * v[1]) / norm2, 0.0)
        });
        let oracle = MomentReport::from_values("g11*conj(g11)", vals).unwrap();
        let u2 = GroupDescriptor::unitary(2).unwrap();
        let samples: Vec<_> = (0..100_000).map(|_| haar_sample(&u2, &mut g).unwrap()).collect();
        let r = entry_moments(&samples).unwrap();
        let g11 = r.iter().find(|m| m.id == "g11*conj(g11)").unwrap();
        let v = two_sample_test(std::slice::from_ref(g11), &[oracle], 5.0).unwrap();
        assert!(v.iter().all(|v| v.pass), "{v:?}");
    }

    #[test]
    fn two_sample_examples() {
        let a = MomentReport::from_values("x", (0..10).map(|i| Complex64::new(i as f64, 0.0))).unwrap();
        let v = two_sample_test(std::slice::from_ref(&a), std::slice::from_ref(&a), 5.0).unwrap();
        assert!(v.iter().all(|v| v.pass && v.z_score == 0.0));

        let p = MomentReport {
            id: "pm".into(),
            estimate: Complex64::new(0.0, 0.0),
            std_error: 1e-6,
            std_error_re: 1e-6,
            std_error_im: 1e-6,
            sample_size: 100,
        };
        let q = MomentReport {
            estimate: Complex64::new(1.0, 0.0),
            ..p.clone()
        };
        let v = two_sample_test(std::slice::from_ref(&p), &[q], 5.0).unwrap();
        assert!(!v[0].pass);

        let other = MomentReport {
            id: "other".into(),
            ..p.clone()
        };
        assert!(matches!(
            two_sample_test(std::slice::from_ref(&p), &[other], 5.0),
            Err(Error::StatisticMismatch(_))
        ));
        assert!(two_sample_test(std::slice::from_ref(&p), &[], 5.0).is_err());
    }

    #[test]
    fn haar_vs_haar_forty_statistics() {
        let u2 = GroupDescriptor::unitary(2).unwrap();
        let mut g = rng(7);
        let s = 50_000;
        let a: Vec<_> = (0..s).map(|_| haar_sample(&u2, &mut g).unwrap()).collect();
        let b: Vec<_> = (0..s).map(|_| haar_sample(&u2, &mut g).unwrap()).collect();
        let mut ra = entry_moments(&a).unwrap();
        ra.extend(trace_moments(&a, 2).unwrap());
        let mut rb = entry_moments(&b).unwrap();
        rb.extend(trace_moments(&b, 2).unwrap());
        let v = two_sample_test(&ra, &rb, 5.0).unwrap();
        assert!(v.len() >= 40);
        assert!(v.iter().all(|v| v.pass), "{:?}", v.iter().find(|v| !v.pass));
    }

    #[test]
    fn ks_examples() {
        let s = 1000;
        let spaced: Vec<f64> = (0..s).map(|i| TAU * (i as f64 + 0.5) / s as f64).collect();
        assert!(ks_uniform(&spaced).unwrap().pass);
        assert!(!ks_uniform(&vec![1.0; s]).unwrap().pass);
        assert!(ks_uniform(&spaced[..10]).is_err());

        let mut g = rng(8);
        let u = uniform_sample(1, &mut g, 10_000);
        assert!(ks_uniform(&u.column(0)).unwrap().pass);
    }

    #[test]
    fn conjugation_leaves_traces_unchanged() {
        let u3 = GroupDescriptor::unitary(3).unwrap();
        let mut g = rng(9);
        let h = haar_sample(&u3, &mut g).unwrap();
        let samples: Vec<_> = (0..100).map(|_| haar_sample(&u3, &mut g).unwrap()).collect();
        let conj: Vec<_> = samples.iter().map(|s| s.conjugate_by(&h)).collect();
        let a = trace_moments(&samples, 3).unwrap();
        let b = trace_moments(&conj, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.estimate - y.estimate).norm() < 1e-10);
        }
    }

    #[test]
    fn report_json_row() {
        let r = MomentReport::from_values("x", [Complex64::new(1.0, 2.0), Complex64::new(3.0, 2.0)]).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["id", "re", "im", "se", "S"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: MomentReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
        let t = serde_json::to_value(TestVerdict::new("x", 1.0, 5.0)).unwrap();
        assert_eq!(
            t,
            serde_json::json!({"id": "x", "z": 1.0, "threshold": 5.0, "pass": true})
        );
    }

    proptest! {
        #[test]
        fn estimators_ignore_sample_order(
            angles in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 20..60),
            p in -3i64..=3,
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let a = AngleSample::new(1, angles.clone()).unwrap();
            let mut shuffled = angles;
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let b = AngleSample::new(1, shuffled).unwrap();
            let ra = empirical_fourier(&a, &[p]).unwrap();
            let rb = empirical_fourier(&b, &[p]).unwrap();
            prop_assert!((ra.estimate - rb.estimate).norm() < 1e-12);
            prop_assert!((ra.std_error - rb.std_error).abs() < 1e-12);
        }

        #[test]
        fn two_sample_is_antisymmetric(
            xs in proptest::collection::vec(-1.0f64..1.0, 5..30),
            ys in proptest::collection::vec(-1.0f64..1.0, 5..30),
        ) {
            let a = MomentReport::from_values("s", xs.iter().map(|x| Complex64::new(*x, x * x))).unwrap();
            let b = MomentReport::from_values("s", ys.iter().map(|y| Complex64::new(*y, -y))).unwrap();
            let ab = two_sample_test(std::slice::from_ref(&a), std::slice::from_ref(&b), 5.0).unwrap();
            let ba = two_sample_test(&[b], &[a], 5.0).unwrap();
            for (u, v) in ab.iter().zip(&ba) {
                prop_assert!((u.z_score + v.z_score).abs() < 1e-9);
            }
        }
    }
}
