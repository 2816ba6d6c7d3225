//! Seeded inputs shared by the benchmarks.

use consel_core::{FeatureShard, ScoreTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` rows of uniform noise in `[-1, 1)`.
pub fn random_shard(seed: u64, count: usize, dim: usize) -> FeatureShard {
    let mut rng = rng(seed);
    let values = (0..count * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    FeatureShard::new(dim, 0, values).expect("finite values")
}

/// Like `random_shard` but with every row scaled to unit length.
pub fn unit_shard(seed: u64, count: usize, dim: usize) -> FeatureShard {
    consel_core::projection::normalize_rows(&random_shard(seed, count, dim)).shard
}

pub fn random_table(seed: u64, n: usize, k: usize) -> ScoreTable {
    let mut rng = rng(seed);
    let scores = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let names = (0..k).map(|t| format!("task{t}")).collect();
    ScoreTable::new(names, n, scores).expect("valid table")
}
