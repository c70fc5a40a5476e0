use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{torus_embed, Family, GroupDescriptor, TorusPoint};
use crate::samplers::{raised_cosine_density, ConjugatedTorusLaw, Law, MixtureU2Law, PerturbedHaarLaw, TorusLaw};
use crate::torus::{FourierDensity, GridDensity};

pub const MIN_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EigenConvergence,
    GroupLimit,
    ExactThreshold,
    PreimageInvariance,
    TorusSuite,
    NegativeControl,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        Self::EigenConvergence,
        Self::GroupLimit,
        Self::ExactThreshold,
        Self::PreimageInvariance,
        Self::TorusSuite,
        Self::NegativeControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::EigenConvergence => "eigen_convergence",
            Self::GroupLimit => "group_limit",
            Self::ExactThreshold => "exact_threshold",
            Self::PreimageInvariance => "preimage_invariance",
            Self::TorusSuite => "torus_suite",
            Self::NegativeControl => "negative_control",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::EigenConvergence => "eigenvalues of U^m against the frozen eigenvalue law of H^D",
            Self::GroupLimit => "U^m against psi(flag, Y) with Y uniform, or another reference law",
            Self::ExactThreshold => {
                "symbolic stationarity threshold, matched at the threshold and detected one power below"
            }
            Self::PreimageInvariance => "limit law built from two preimage constructions of the same law",
            Self::TorusSuite => "torus pushforward: oracle equivalence, exact properties, convergence to uniform",
            Self::NegativeControl => "runs another experiment and passes iff that experiment fails",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub family: Family,
    pub n: usize,
}

impl GroupSpec {
    pub fn descriptor(&self) -> Result<GroupDescriptor> {
        GroupDescriptor::new(self.family, self.n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TorusDensitySpec {
    /// Product of `(1 + cos θ)/(2π)` marginals.
    RaisedCosine,
    Fourier {
        density: FourierDensity,
    },
    Grid {
        density: GridDensity,
    },
}

impl TorusDensitySpec {
    pub fn build(&self, rank: usize) -> Result<TorusLaw> {
        let law = match self {
            Self::RaisedCosine => TorusLaw::Fourier(raised_cosine_density(rank)),
            Self::Fourier { density } => TorusLaw::Fourier(density.clone()),
            Self::Grid { density } => TorusLaw::Grid(density.clone()),
        };
        if law.rank() != rank {
            return Err(Error::Config(format!(
                "torus density has rank {}, expected {rank}",
                law.rank()
            )));
        }
        Ok(law)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    #[default]
    Haar,
    Perturbed {
        a: f64,
    },
    MixtureU2 {
        #[serde(default = "raised_cosine")]
        d1: TorusDensitySpec,
        #[serde(default = "raised_cosine")]
        d2: TorusDensitySpec,
    },
    TorusDensity {
        density: TorusDensitySpec,
    },
    /// Point mass at the torus element with these angles (identity if absent).
    PointMass {
        #[serde(default)]
        angles: Option<Vec<f64>>,
    },
}

fn raised_cosine() -> TorusDensitySpec {
    TorusDensitySpec::RaisedCosine
}

impl LawSpec {
    pub fn build(&self, descriptor: &GroupDescriptor) -> Result<Law> {
        Ok(match self {
            Self::Haar => Law::Haar(descriptor.clone()),
            Self::Perturbed { a } => {
                Law::Perturbed(PerturbedHaarLaw::new(descriptor.clone(), *a).map_err(|e| Error::Config(e.to_string()))?)
            }
            Self::MixtureU2 { d1, d2 } => {
                if *descriptor != GroupDescriptor::unitary(2)? {
                    return Err(Error::Config("mixture_u2 requires group U(2)".into()));
                }
                Law::MixtureU2(MixtureU2Law::new(d1.build(2)?, d2.build(2)?)?)
            }
            Self::TorusDensity { density } => Law::TorusDensity(ConjugatedTorusLaw::new(
                descriptor.clone(),
                density.build(descriptor.torus_rank())?,
            )?),
            Self::PointMass { angles } => {
                let angles = angles.clone().unwrap_or_else(|| vec![0.0; descriptor.torus_rank()]);
                let t = TorusPoint::new(angles).map_err(|e| Error::Config(e.to_string()))?;
                Law::PointMass(torus_embed(descriptor, &t).map_err(|e| Error::Config(e.to_string()))?)
            }
        })
    }
}

/// Law the powers are compared against in `group_limit`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// `ψ(flag, Y)` over uniform preimages of fresh draws from the law.
    #[default]
    PreimageLimit,
    /// `X·Y + (1 - X)·a Y a*` (mixture law only).
    ExplicitMixture,
    /// `H^D` with `H` Haar.
    HaarPower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreimageConstruction {
    Sorted,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreimagePair {
    pub first: PreimageConstruction,
    pub second: PreimageConstruction,
}

impl Default for PreimagePair {
    fn default() -> Self {
        Self {
            first: PreimageConstruction::Sorted,
            second: PreimageConstruction::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusSuiteSpec {
    pub rank: usize,
    /// Maximal `|p_j|` of the random densities.
    pub degree: i64,
    pub densities: usize,
    pub grid_size: usize,
    /// Powers for the exact grid checks. Each must divide `grid_size`.
    pub exact_powers: Vec<u64>,
    pub signed_trials: usize,
}

impl Default for TorusSuiteSpec {
    fn default() -> Self {
        Self {
            rank: 2,
            degree: 3,
            densities: 20,
            grid_size: 360,
            exact_powers: vec![2, 3, 4, 6],
            signed_trials: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

fn default_lattice_max() -> i64 {
    3
}

fn default_trace_k_max() -> u32 {
    3
}

fn default_threshold() -> f64 {
    crate::stats::DEFAULT_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSpec>,
    #[serde(default)]
    pub law: LawSpec,
    pub powers: Vec<u64>,
    pub samples: usize,
    pub seed: u64,
    /// Fourier coefficients are tested on `0 < max |p_j| ≤ lattice_max`.
    #[serde(default = "default_lattice_max")]
    pub lattice_max: i64,
    #[serde(default = "default_trace_k_max")]
    pub trace_k_max: u32,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub preimages: PreimagePair,
    #[serde(default)]
    pub torus: TorusSuiteSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_of: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let config = Self::read(path)?;
        config.validate()?;
        Ok(config)
    }

    /// Parses without validating, for callers that override fields first.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config = Self::parse(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn descriptor(&self) -> Result<GroupDescriptor> {
        self.group
            .ok_or_else(|| Error::Config(format!("{} needs a group", self.kind)))?
            .descriptor()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn law(&self) -> Result<Law> {
        self.law.build(&self.descriptor()?)
    }

    /// Kind the experiment's statistics come from: `control_of` for a
    /// negative control, the kind itself otherwise.
    pub fn effective_kind(&self) -> ExperimentKind {
        match self.kind {
            ExperimentKind::NegativeControl => self.control_of.unwrap_or(ExperimentKind::EigenConvergence),
            k => k,
        }
    }

    /// Checks everything that can be checked without sampling.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.samples < MIN_SAMPLES {
            return fail(format!("samples must be at least {MIN_SAMPLES}, got {}", self.samples));
        }
        if self.powers.is_empty() && self.effective_kind() != ExperimentKind::ExactThreshold {
            return fail("powers must not be empty".into());
        }
        if self.powers.contains(&0) {
            return fail("powers must be at least 1".into());
        }
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return fail(format!("threshold must be positive, got {}", self.threshold));
        }
        if self.lattice_max < 1 || self.trace_k_max < 1 {
            return fail("lattice_max and trace_k_max must be at least 1".into());
        }
        match (self.kind, self.control_of) {
            (ExperimentKind::NegativeControl, None) => return fail("negative_control needs control_of".into()),
            (ExperimentKind::NegativeControl, Some(ExperimentKind::NegativeControl)) => {
                return fail("a negative control cannot wrap another negative control".into())
            }
            (ExperimentKind::NegativeControl, _) => {}
            (_, Some(_)) => return fail("control_of is only valid for negative_control".into()),
            _ => {}
        }
        let kind = self.effective_kind();
        if kind == ExperimentKind::TorusSuite {
            let t = &self.torus;
            if t.rank == 0 || t.degree < 0 || t.densities == 0 {
                return fail("torus suite needs rank >= 1, degree >= 0 and densities >= 1".into());
            }
            if let Some(m) = t
                .exact_powers
                .iter()
                .find(|&&m| m == 0 || !(t.grid_size as u64).is_multiple_of(m))
            {
                return fail(format!(
                    "exact power {m} must be positive and divide grid_size {}",
                    t.grid_size
                ));
            }
            if t.grid_size as i64 <= 2 * t.degree {
                return fail("grid_size must exceed twice the degree".into());
            }
            return Ok(());
        }
        let law = self.law()?;
        let needs_preimages = match kind {
            ExperimentKind::GroupLimit => self.reference == Reference::PreimageLimit,
            ExperimentKind::PreimageInvariance | ExperimentKind::ExactThreshold => true,
            _ => false,
        };
        if needs_preimages && !law.has_torus_density() {
            return fail(format!("{kind} needs a law whose preimages are regular almost surely"));
        }
        if kind == ExperimentKind::ExactThreshold {
            law.symbolic_eigen_density().map_err(|e| Error::Config(e.to_string()))?;
        }
        if kind == ExperimentKind::GroupLimit
            && self.reference == Reference::ExplicitMixture
            && !matches!(law, Law::MixtureU2(_))
        {
            return fail("reference explicit_mixture needs law mixture_u2".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(kind: &str, extra: &str) -> String {
        format!(
            r#"{{"kind": "{kind}", "group": {{"family": "U", "n": 2}}, "powers": [2], "samples": 1000, "seed": 1{extra}}}"#
        )
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::from_json(&base("eigen_convergence", "")).unwrap();
        assert_eq!(c.law, LawSpec::Haar);
        assert_eq!(c.lattice_max, 3);
        assert_eq!(c.threshold, 5.0);
        assert_eq!(c.format, OutputFormat::Json);
        assert_eq!(c.preimages, PreimagePair::default());
    }

    #[test]
    fn round_trips_through_json() {
        let c = ExperimentConfig::from_json(&base(
            "group_limit",
            r#", "law": {"type": "mixture_u2"}, "reference": "explicit_mixture""#,
        ))
        .unwrap();
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad = [
            base("eigen_convergence", "").replace("1000", "99"),
            base("eigen_convergence", "").replace("[2]", "[0]"),
            base("eigen_convergence", "").replace("[2]", "[]"),
            base("eigen_convergence", r#", "law": {"type": "perturbed", "a": 2.0}"#),
            base("eigen_convergence", r#", "law": {"type": "mixture_u2"}"#).replace("\"n\": 2", "\"n\": 3"),
            base("exact_threshold", r#", "law": {"type": "point_mass"}"#),
            base("negative_control", ""),
            base("eigen_convergence", r#", "control_of": "group_limit""#),
            base("group_limit", r#", "reference": "explicit_mixture""#),
            base("eigen_convergence", r#", "unknown": 1"#),
            base("eigen_convergence", "").replace("\"U\"", "\"SO\""),
            base("torus_suite", r#", "torus": {"grid_size": 100, "exact_powers": [3]}"#),
        ];
        for text in bad {
            assert!(
                matches!(ExperimentConfig::from_json(&text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn exact_threshold_needs_symbolic_density() {
        let text =
            base("exact_threshold", r#", "law": {"type": "perturbed", "a": 0.5}"#).replace("\"n\": 2", "\"n\": 5");
        assert!(ExperimentConfig::from_json(&text).is_err());
        let ok = base("exact_threshold", r#", "law": {"type": "perturbed", "a": 0.5}"#);
        assert!(ExperimentConfig::from_json(&ok).is_ok());
    }
}
