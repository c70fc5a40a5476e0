//! Powers of random elements of compact matrix groups.
//!
//! The crate samples random elements of `U(N)`, `SU(N)` and `SO(2k+1)`,
//! decomposes them over the maximal torus, and checks that the eigenvalues of
//! `U^m` and `U^m` itself approach their limit laws as `m` grows. Exact torus
//! computations (Fourier coefficients, the branch-averaging operator) sit next
//! to the Monte-Carlo estimators that test them.

pub mod error;
pub mod experiments;
pub mod groups;
pub mod laurent;
pub mod linalg;
pub mod preimage;
pub mod samplers;
pub mod shard;
pub mod stats;
pub mod torus;

pub use error::{Error, Result};
pub use groups::{
    eigenangles, haar_sample, monomial_eval, power, rains_limit_sample, torus_embed, Family, GroupDescriptor,
    GroupElement, TorusPoint,
};
pub use preimage::{Preimage, WeylElement};
pub use stats::{MomentReport, TestVerdict};
pub use torus::{AngleSample, FourierDensity, GridDensity, LatticePoint};
