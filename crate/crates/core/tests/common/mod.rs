#![allow(dead_code)]

use std::path::Path;

use consel_core::datastore::{write_shard, FeatureShard, Manifest, ScoreTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// Rows rounded to f32 and then scaled to unit norm in f32.
pub fn unit_rows(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f32>> {
    gaussian_rows(rng, count, dim)
        .into_iter()
        .map(|r| {
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            r.iter().map(|v| (v / norm) as f32).collect()
        })
        .collect()
}

pub fn shard_of(dim: usize, base_id: u64, rows: &[Vec<f32>]) -> FeatureShard {
    FeatureShard::from_rows(dim, base_id, rows).unwrap()
}

pub fn naive_dot(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0;
    for j in 0..a.len() {
        s += f64::from(a[j]) * f64::from(b[j]);
    }
    s
}

pub fn naive_matrix(train: &[Vec<f32>], val: &[Vec<f32>]) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; val.len()]; train.len()];
    for i in 0..train.len() {
        for j in 0..val.len() {
            m[i][j] = naive_dot(&train[i], &val[j]);
        }
    }
    m
}

pub fn naive_means(train: &[Vec<f32>], val: &[Vec<f32>]) -> Vec<f64> {
    naive_matrix(train, val)
        .iter()
        .map(|row| {
            let mut s = 0.0;
            for v in row {
                s += v;
            }
            s / row.len() as f64
        })
        .collect()
}

/// Writes train shards and one validation shard per task under `dir` and
/// returns the saved manifest.
pub fn write_toy_manifest(
    dir: &Path,
    dim: usize,
    train: &[Vec<Vec<f32>>],
    tasks: &[(&str, Vec<Vec<f32>>)],
) -> Manifest {
    let mut manifest = Manifest::new(dim, dir);
    let mut base = 0u64;
    for (s, rows) in train.iter().enumerate() {
        let name = format!("train{s}.bin");
        write_shard(&shard_of(dim, base, rows), &dir.join(&name)).unwrap();
        manifest.push_train_shard(name, rows.len() as u64);
        base += rows.len() as u64;
    }
    for (name, rows) in tasks {
        let file = format!("val_{name}.bin");
        write_shard(&shard_of(dim, 0, rows), &dir.join(&file)).unwrap();
        manifest.push_task(*name, file, rows.len() as u64);
    }
    manifest.normalized = true;
    manifest.save(&dir.join("manifest.json")).unwrap();
    manifest
}

pub fn random_table(rng: &mut ChaCha8Rng, n: usize, k: usize) -> ScoreTable {
    let names = (0..k).map(|t| format!("t{t}")).collect();
    let scores = (0..n * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScoreTable::new(names, n, scores).unwrap()
}

pub fn table_from_columns(columns: &[Vec<f64>]) -> ScoreTable {
    let names = (0..columns.len()).map(|t| format!("t{t}")).collect();
    ScoreTable::from_columns(names, columns).unwrap()
}
