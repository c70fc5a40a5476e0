//! Named experiments built from samplers, transforms and statistics.
//!
//! An [`ExperimentConfig`] (one JSON file) selects a kind, a group, a law,
//! powers and sample sizes; [`run`] returns an [`ExperimentReport`] whose
//! summary passes iff every row does. Sampling is sharded over a fixed
//! number of ChaCha streams, so reports depend on the seed only.

pub mod config;
pub mod report;
pub mod runners;

pub use config::{
    ExperimentConfig, ExperimentKind, GroupSpec, LawSpec, OutputFormat, PreimageConstruction, PreimagePair, Reference,
    TorusDensitySpec, TorusSuiteSpec,
};
pub use report::{Expect, ExperimentReport, PowerTable, ReportRow};
pub use runners::{
    run, run_eigen_convergence, run_exact_threshold, run_group_limit, run_preimage_invariance, run_torus_suite,
};
