//! Deterministic parallel sampling. A run of `count` draws is split into a
//! fixed number of shards, each with its own ChaCha stream, so the output
//! does not depend on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;

pub const SHARDS: u64 = 16;
const STREAMS_PER_PURPOSE: u64 = 4096;

/// The generator for one shard of one purpose under `seed`.
pub fn shard_rng(seed: u64, purpose: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose * STREAMS_PER_PURPOSE + shard);
    rng
}

/// `count` draws of `f`, generated in parallel and concatenated in shard
/// order.
pub fn parallel_draws<T, F>(seed: u64, purpose: u64, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    let shards = SHARDS as usize;
    let base = count / shards;
    let extra = count % shards;
    let parts: Vec<Result<Vec<T>>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let len = base + usize::from(s < extra);
            let mut rng = shard_rng(seed, purpose, s as u64);
            (0..len).map(|_| f(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}
