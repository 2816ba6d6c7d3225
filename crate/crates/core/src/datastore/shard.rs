use std::path::Path;

use super::container::{self, ContainerReader, Dtype, Header};
use crate::error::{Error, Result};

/// A dense row-major block of per-example feature vectors.
///
/// Row `r` belongs to the example with global id `base_id + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureShard {
    dim: usize,
    base_id: u64,
    values: Vec<f32>,
}

impl FeatureShard {
    pub fn new(dim: usize, base_id: u64, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidHeader("dim must be at least 1".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not fill rows of width {dim}",
                values.len()
            )));
        }
        Ok(FeatureShard {
            dim,
            base_id,
            values,
        })
    }

    /// Builds a shard from row vectors, all of which must have length `dim`.
    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, base_id: u64, rows: &[R]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has length {}, expected {dim}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, base_id, values)
    }

    pub fn empty(dim: usize, base_id: u64) -> Result<Self> {
        Self::new(dim, base_id, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn base_id(&self) -> u64 {
        self.base_id
    }

    pub fn with_base_id(mut self, base_id: u64) -> Self {
        self.base_id = base_id;
        self
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.dim..(r + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.values.chunks_exact(self.dim)
    }

    /// Returns the first non-finite entry, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(Error::NonFinite {
                row: p / self.dim,
                col: p % self.dim,
            }),
            None => Ok(()),
        }
    }

    /// Splits into consecutive blocks of at most `block_rows` rows.
    pub fn split(&self, block_rows: usize) -> Vec<FeatureShard> {
        assert!(block_rows > 0, "block_rows must be positive");
        if self.values.is_empty() {
            return vec![self.clone()];
        }
        self.values
            .chunks(block_rows * self.dim)
            .enumerate()
            .map(|(b, chunk)| FeatureShard {
                dim: self.dim,
                base_id: self.base_id + (b * block_rows) as u64,
                values: chunk.to_vec(),
            })
            .collect()
    }

    /// Concatenates contiguous blocks back into one shard.
    pub fn concat(blocks: &[FeatureShard]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::Empty("no blocks to concatenate".into()))?;
        let mut values = Vec::with_capacity(blocks.iter().map(|b| b.values.len()).sum());
        let mut next_id = first.base_id;
        for b in blocks {
            if b.dim != first.dim {
                return Err(Error::DimensionMismatch(format!(
                    "block dim {} differs from {}",
                    b.dim, first.dim
                )));
            }
            if b.base_id != next_id {
                return Err(Error::InvalidArgument(format!(
                    "block base_id {} is not contiguous (expected {next_id})",
                    b.base_id
                )));
            }
            next_id += b.count() as u64;
            values.extend_from_slice(&b.values);
        }
        Self::new(first.dim, first.base_id, values)
    }
}

/// Writes `shard` to `destination`. Refuses shards holding NaN or infinity.
pub fn write_shard(shard: &FeatureShard, destination: &Path) -> Result<()> {
    shard.check_finite()?;
    let dim = u32::try_from(shard.dim)
        .map_err(|_| Error::InvalidHeader(format!("dim {} exceeds u32", shard.dim)))?;
    let header = Header {
        dtype: Dtype::F32,
        dim,
        count: shard.count() as u64,
    };
    let mut payload = Vec::with_capacity(shard.values.len() * 4);
    for v in &shard.values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    container::write_container(destination, header, &payload)
}

/// Reads and verifies a shard. The returned shard has `base_id` 0; the
/// manifest owns global id assignment.
pub fn read_shard(source: &Path) -> Result<FeatureShard> {
    let (header, payload) = container::read_container(source, Dtype::F32)?;
    let shard = FeatureShard::new(header.dim as usize, 0, decode_f32(&payload))?;
    shard.check_finite()?;
    Ok(shard)
}

/// Reads only the header of a shard file, validating its length.
pub fn shard_header(source: &Path) -> Result<Header> {
    Ok(ContainerReader::open(source, Dtype::F32)?.header)
}

fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

/// Streams a shard in blocks of at most `block_rows` rows, with global ids
/// starting at 0.
///
/// The checksum is verified in a first pass, so no block of a corrupted file
/// is ever yielded.
pub fn stream_blocks(source: &Path, block_rows: usize) -> Result<ShardBlocks> {
    stream_blocks_from(source, block_rows, 0)
}

/// As [`stream_blocks`], numbering rows from `base_id`.
pub fn stream_blocks_from(source: &Path, block_rows: usize, base_id: u64) -> Result<ShardBlocks> {
    if block_rows == 0 {
        return Err(Error::InvalidArgument("block_rows must be positive".into()));
    }
    let mut reader = ContainerReader::open(source, Dtype::F32)?;
    reader.verify()?;
    let remaining = reader.header.count;
    Ok(ShardBlocks {
        reader,
        block_rows,
        next_id: base_id,
        remaining,
        emitted_any: false,
    })
}

#[derive(Debug)]
pub struct ShardBlocks {
    reader: ContainerReader,
    block_rows: usize,
    next_id: u64,
    remaining: u64,
    emitted_any: bool,
}

impl ShardBlocks {
    pub fn dim(&self) -> usize {
        self.reader.header.dim as usize
    }

    pub fn total_rows(&self) -> u64 {
        self.reader.header.count
    }
}

impl Iterator for ShardBlocks {
    type Item = Result<FeatureShard>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            // An empty shard still yields one empty block so callers see its dim.
            if !self.emitted_any {
                self.emitted_any = true;
                return Some(FeatureShard::empty(self.dim(), self.next_id));
            }
            return None;
        }
        self.emitted_any = true;
        let rows = self.remaining.min(self.block_rows as u64) as usize;
        let dim = self.dim();
        let mut buf = vec![0u8; rows * dim * 4];
        if let Err(e) = self.reader.read_payload(&mut buf) {
            self.remaining = 0;
            return Some(Err(e));
        }
        let base = self.next_id;
        self.next_id += rows as u64;
        self.remaining -= rows as u64;
        let block = FeatureShard::new(dim, base, decode_f32(&buf)).and_then(|b| {
            b.check_finite().map_err(|e| match e {
                Error::NonFinite { row, col } => Error::NonFinite {
                    row: row + (base as usize),
                    col,
                },
                other => other,
            })?;
            Ok(b)
        });
        Some(block)
    }
}
