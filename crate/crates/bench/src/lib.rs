//! Fixed inputs shared by the benchmarks.

use powerlimits::torus::FourierDensity;
use powerlimits::{haar_sample, GroupDescriptor, GroupElement};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed)
}

/// `count` Haar draws from `descriptor` under a fixed seed.
pub fn haar_batch(descriptor: &GroupDescriptor, count: usize) -> Vec<GroupElement> {
    let mut r = rng();
    (0..count)
        .map(|_| haar_sample(descriptor, &mut r).expect("haar sampling"))
        .collect()
}

/// A random rank-2 density of degree 3 under a fixed seed.
pub fn density_t2() -> FourierDensity {
    FourierDensity::random(2, 3, &mut rng())
}
