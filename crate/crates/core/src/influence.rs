//! Train-by-validation influence matrices and per-task mean influence.
//!
//! Inputs are expected to be unit-normalized ahead of time, which turns the
//! cosine influence into a plain dot product. Every dot product accumulates
//! in f64 over columns in ascending order, and every row mean sums over
//! validation examples in ascending order, so results do not depend on block
//! size or thread count.

use rayon::prelude::*;

use crate::datastore::{read_shard, stream_blocks_from, FeatureShard, Manifest, ScoreTable};
use crate::error::{Error, Result};

/// Tolerance on row norms accepted as "unit" by [`InnerProduct::Cosine`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerProduct {
    /// Rows must already be unit-normalized (or zero); entries are clamped to
    /// `[-1, 1]` to absorb f32 storage rounding.
    #[default]
    Cosine,
    /// Plain inner products of whatever is stored.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceMatrix {
    pub task_name: String,
    pub n_train: usize,
    pub n_val: usize,
    /// Row-major `n_train x n_val`.
    pub entries: Vec<f64>,
}

impl InfluenceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_val + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_val..(i + 1) * self.n_val]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskScores {
    pub task_name: String,
    pub scores: Vec<f64>,
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (&x, &y)| acc + f64::from(x) * f64::from(y))
}

fn check_unit_rows(shard: &FeatureShard, what: &str) -> Result<()> {
    for (r, row) in shard.rows().enumerate() {
        let sq = dot(row, row);
        if sq != 0.0 && (sq.sqrt() - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::NotNormalized(format!(
                "{what} row {} has norm {:.6}",
                shard.base_id() + r as u64,
                sq.sqrt()
            )));
        }
    }
    Ok(())
}

/// One influence entry under the given inner product.
#[inline]
fn influence(train_row: &[f32], val_row: &[f32], mode: InnerProduct) -> f64 {
    let d = dot(train_row, val_row);
    match mode {
        InnerProduct::Cosine => d.clamp(-1.0, 1.0),
        InnerProduct::Raw => d,
    }
}

/// Validates a stream of train blocks against `dim`, yielding them in order.
struct CheckedBlocks<I> {
    inner: I,
    dim: usize,
    next_id: Option<u64>,
    mode: InnerProduct,
}

impl<I: Iterator<Item = Result<FeatureShard>>> Iterator for CheckedBlocks<I> {
    type Item = Result<FeatureShard>;

    fn next(&mut self) -> Option<Self::Item> {
        let block = match self.inner.next()? {
            Ok(b) => b,
            Err(e) => return Some(Err(e)),
        };
        let check = || -> Result<()> {
            if block.dim() != self.dim {
                return Err(Error::DimensionMismatch(format!(
                    "train dim {} differs from validation dim {}",
                    block.dim(),
                    self.dim
                )));
            }
            if let Some(expected) = self.next_id {
                if block.base_id() != expected {
                    return Err(Error::InvalidArgument(format!(
                        "train block base_id {} is not contiguous (expected {expected})",
                        block.base_id()
                    )));
                }
            }
            if self.mode == InnerProduct::Cosine {
                check_unit_rows(&block, "train")?;
            }
            Ok(())
        };
        if let Err(e) = check() {
            return Some(Err(e));
        }
        self.next_id = Some(block.base_id() + block.count() as u64);
        Some(Ok(block))
    }
}

fn checked<I>(train: I, dim: usize, mode: InnerProduct) -> CheckedBlocks<I::IntoIter>
where
    I: IntoIterator<Item = Result<FeatureShard>>,
{
    CheckedBlocks {
        inner: train.into_iter(),
        dim,
        next_id: None,
        mode,
    }
}

/// Materializes the full influence matrix of a streamed training set against
/// one validation shard.
pub fn influence_matrix<I>(
    train: I,
    val: &FeatureShard,
    task_name: &str,
    mode: InnerProduct,
) -> Result<InfluenceMatrix>
where
    I: IntoIterator<Item = Result<FeatureShard>>,
{
    if mode == InnerProduct::Cosine {
        check_unit_rows(val, "validation")?;
    }
    let n_val = val.count();
    let mut entries = Vec::new();
    let mut n_train = 0;
    for block in checked(train, val.dim(), mode) {
        let block = block?;
        let rows: Vec<Vec<f64>> = block
            .values()
            .par_chunks_exact(block.dim())
            .map(|t| val.rows().map(|v| influence(t, v, mode)).collect())
            .collect();
        n_train += rows.len();
        entries.extend(rows.into_iter().flatten());
    }
    Ok(InfluenceMatrix {
        task_name: task_name.to_string(),
        n_train,
        n_val,
        entries,
    })
}

/// Mean of each row of `matrix`.
pub fn task_mean_scores(matrix: &InfluenceMatrix) -> Result<TaskScores> {
    if matrix.n_val == 0 {
        return Err(Error::Empty(format!(
            "task {:?} has no validation examples",
            matrix.task_name
        )));
    }
    let scores = (0..matrix.n_train)
        .map(|i| matrix.row(i).iter().fold(0.0, |a, &b| a + b) / matrix.n_val as f64)
        .collect();
    Ok(TaskScores {
        task_name: matrix.task_name.clone(),
        scores,
    })
}

/// Reduces a streamed training set straight to an `N x K` table of mean
/// influences, one column per validation shard, without materializing any
/// influence matrix. Bit-identical to `task_mean_scores(influence_matrix(..))`
/// per column.
pub fn stream_task_scores<I>(
    train: I,
    tasks: &[(String, FeatureShard)],
    mode: InnerProduct,
) -> Result<ScoreTable>
where
    I: IntoIterator<Item = Result<FeatureShard>>,
{
    let first = tasks
        .first()
        .ok_or_else(|| Error::Empty("no tasks".into()))?;
    let dim = first.1.dim();
    for (name, val) in tasks {
        if val.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "task {name:?} has dim {}, expected {dim}",
                val.dim()
            )));
        }
        if val.count() == 0 {
            return Err(Error::Empty(format!(
                "task {name:?} has no validation examples"
            )));
        }
        if mode == InnerProduct::Cosine {
            check_unit_rows(val, "validation")?;
        }
    }
    let k = tasks.len();
    let mut scores = Vec::new();
    let mut n = 0;
    for block in checked(train, dim, mode) {
        let block = block?;
        let rows: Vec<f64> = block
            .values()
            .par_chunks_exact(dim)
            .flat_map_iter(|t| {
                tasks.iter().map(move |(_, val)| {
                    let sum = val
                        .rows()
                        .fold(0.0, |acc, v| acc + influence(t, v, mode));
                    sum / val.count() as f64
                })
            })
            .collect();
        n += block.count();
        scores.extend(rows);
    }
    debug_assert_eq!(scores.len(), n * k);
    ScoreTable::new(tasks.iter().map(|(n, _)| n.clone()).collect(), n, scores)
}

/// Row-wise `clean - noise`: the gradient change attributable to the visual
/// input, fed through normalization and influence like any other feature.
pub fn vds_delta_features(clean: &FeatureShard, noise: &FeatureShard) -> Result<FeatureShard> {
    if clean.dim() != noise.dim()
        || clean.count() != noise.count()
        || clean.base_id() != noise.base_id()
    {
        return Err(Error::DimensionMismatch(format!(
            "clean shard ({} x {} at {}) and noise shard ({} x {} at {}) are not aligned",
            clean.count(),
            clean.dim(),
            clean.base_id(),
            noise.count(),
            noise.dim(),
            noise.base_id()
        )));
    }
    let values = clean
        .values()
        .iter()
        .zip(noise.values())
        .map(|(c, n)| c - n)
        .collect();
    FeatureShard::new(clean.dim(), clean.base_id(), values)
}

/// Computes the full score table for a manifest, streaming the training
/// shards `block_rows` at a time.
pub fn build_all_task_scores(manifest: &Manifest, block_rows: usize) -> Result<ScoreTable> {
    build_all_task_scores_with(manifest, block_rows, InnerProduct::Cosine)
}

pub fn build_all_task_scores_with(
    manifest: &Manifest,
    block_rows: usize,
    mode: InnerProduct,
) -> Result<ScoreTable> {
    manifest.validate()?;
    if mode == InnerProduct::Cosine && !manifest.normalized {
        return Err(Error::NotNormalized(
            "manifest is not marked normalized; use raw inner products explicitly".into(),
        ));
    }
    let tasks = manifest
        .tasks
        .iter()
        .map(|t| Ok((t.name.clone(), read_shard(&manifest.resolve(&t.val_shard))?)))
        .collect::<Result<Vec<_>>>()?;

    let mut streams = Vec::with_capacity(manifest.train_shards.len());
    for s in &manifest.train_shards {
        streams.push(stream_blocks_from(
            &manifest.resolve(&s.path),
            block_rows,
            s.base_id,
        )?);
    }
    let table = stream_task_scores(streams.into_iter().flatten(), &tasks, mode)?;
    if table.n() as u64 != manifest.train_count() {
        return Err(Error::InvalidManifest(format!(
            "manifest lists {} training rows, shards hold {}",
            manifest.train_count(),
            table.n()
        )));
    }
    Ok(table)
}
