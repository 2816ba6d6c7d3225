//! Seeded Rademacher random projection and row normalization.
//!
//! The projection matrix `R` (`out_dim x in_dim`) is never stored. Entry
//! `(row, col)` is `+1/sqrt(out_dim)` when the low bit of
//! `splitmix64(seed ^ (row * in_dim + col))` is 0 and `-1/sqrt(out_dim)`
//! otherwise, so any block of rows or columns can be regenerated
//! independently and bit-exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datastore::FeatureShard;
use crate::error::{Error, Result};

/// Number of interleaved partial sums in a projected dot product. Column
/// `c` always lands in lane `c % ACC_LANES` and lanes are reduced pairwise in
/// a fixed tree, so results do not depend on threading or block layout.
const ACC_LANES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionFamily {
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub seed: u64,
    pub in_dim: usize,
    pub out_dim: usize,
    pub family: ProjectionFamily,
}

impl ProjectionSpec {
    pub fn rademacher(seed: u64, in_dim: usize, out_dim: usize) -> Self {
        ProjectionSpec {
            seed,
            in_dim,
            out_dim,
            family: ProjectionFamily::Rademacher,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "projection dims must be positive (in {}, out {})",
                self.in_dim, self.out_dim
            )));
        }
        Ok(())
    }

    pub fn scale(&self) -> f64 {
        1.0 / (self.out_dim as f64).sqrt()
    }

    #[inline]
    fn negative(&self, row: usize, col: usize) -> bool {
        let counter = (row as u64)
            .wrapping_mul(self.in_dim as u64)
            .wrapping_add(col as u64);
        splitmix64(self.seed ^ counter) & 1 == 1
    }

    fn sign_row(&self, row: usize, out: &mut [f64]) {
        for (col, s) in out.iter_mut().enumerate() {
            *s = if self.negative(row, col) { -1.0 } else { 1.0 };
        }
    }
}

/// The splitmix64 output function applied to a single counter value.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn projection_entry(spec: &ProjectionSpec, row: usize, col: usize) -> Result<f64> {
    if row >= spec.out_dim || col >= spec.in_dim {
        return Err(Error::InvalidArgument(format!(
            "entry ({row}, {col}) outside {}x{} projection",
            spec.out_dim, spec.in_dim
        )));
    }
    let s = spec.scale();
    Ok(if spec.negative(row, col) { -s } else { s })
}

#[inline]
fn signed_dot(signs: &[f64], x: &[f64]) -> f64 {
    let mut acc = [0.0f64; ACC_LANES];
    let mut s_chunks = signs.chunks_exact(ACC_LANES);
    let mut x_chunks = x.chunks_exact(ACC_LANES);
    for (s, v) in (&mut s_chunks).zip(&mut x_chunks) {
        for l in 0..ACC_LANES {
            acc[l] += s[l] * v[l];
        }
    }
    for (l, (s, v)) in s_chunks
        .remainder()
        .iter()
        .zip(x_chunks.remainder())
        .enumerate()
    {
        acc[l] += s * v;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// Computes `R x` for every row of `block`, accumulating in f64 and storing
/// f32. Output keeps the block's count and base id.
pub fn project_block(spec: &ProjectionSpec, block: &FeatureShard) -> Result<FeatureShard> {
    spec.validate()?;
    if block.dim() != spec.in_dim {
        return Err(Error::DimensionMismatch(format!(
            "block dim {} differs from projection in_dim {}",
            block.dim(),
            spec.in_dim
        )));
    }
    let count = block.count();
    let input: Vec<f64> = block.values().iter().map(|&v| f64::from(v)).collect();
    let scale = spec.scale();

    // One output coordinate at a time: its sign row is generated once and
    // reused for every example in the block.
    let columns: Vec<Vec<f32>> = (0..spec.out_dim)
        .into_par_iter()
        .map_init(
            || vec![0.0f64; spec.in_dim],
            |signs, o| {
                spec.sign_row(o, signs);
                input
                    .chunks_exact(spec.in_dim)
                    .map(|x| (signed_dot(signs, x) * scale) as f32)
                    .collect()
            },
        )
        .collect();

    let mut values = vec![0.0f32; count * spec.out_dim];
    for (o, col) in columns.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            values[r * spec.out_dim + o] = v;
        }
    }
    FeatureShard::new(spec.out_dim, block.base_id(), values)
}

/// Outcome of [`normalize_rows`].
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub shard: FeatureShard,
    /// Rows that were entirely zero and so were left as zero.
    pub zero_rows: usize,
}

/// Scales every nonzero row to unit Euclidean norm.
pub fn normalize_rows(block: &FeatureShard) -> Normalized {
    let dim = block.dim();
    let mut values = Vec::with_capacity(block.values().len());
    let mut zero_rows = 0;
    for row in block.rows() {
        let norm = row
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            zero_rows += 1;
            values.extend(std::iter::repeat_n(0.0f32, dim));
        } else {
            values.extend(row.iter().map(|&v| (f64::from(v) / norm) as f32));
        }
    }
    if zero_rows > 0 {
        log::warn!(
            "{zero_rows} zero rows left unnormalized in block at base id {}",
            block.base_id()
        );
    }
    Normalized {
        shard: FeatureShard::new(dim, block.base_id(), values).expect("same shape as input"),
        zero_rows,
    }
}
