use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::container::{self, Dtype, Header};
use crate::error::{Error, Result};

/// Per-task mean influence of every training example: `n` rows by `k`
/// columns, row-major, columns in manifest task order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    n: usize,
    k: usize,
    scores: Vec<f64>,
    task_names: Vec<String>,
}

impl ScoreTable {
    pub fn new(task_names: Vec<String>, n: usize, scores: Vec<f64>) -> Result<Self> {
        let k = task_names.len();
        if k == 0 {
            return Err(Error::Empty("score table needs at least one task".into()));
        }
        if scores.len() != n * k {
            return Err(Error::DimensionMismatch(format!(
                "{} scores for a {n}x{k} table",
                scores.len()
            )));
        }
        if let Some(p) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: p / k,
                col: p % k,
            });
        }
        Ok(ScoreTable {
            n,
            k,
            scores,
            task_names,
        })
    }

    /// Builds a table from per-task columns of equal length.
    pub fn from_columns(task_names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        if task_names.len() != columns.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} columns",
                task_names.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch("columns differ in length".into()));
        }
        let k = columns.len();
        let mut scores = vec![0.0; n * k];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                scores[i * k + j] = v;
            }
        }
        Self::new(task_names, n, scores)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn task_names(&self) -> &[String] {
        &self.task_names
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, i: usize, task: usize) -> f64 {
        self.scores[i * self.k + task]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.k..(i + 1) * self.k]
    }

    pub fn column(&self, task: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, task)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.k).map(|t| self.column(t)).collect()
    }

    /// Applies `f(task, value)` to every entry.
    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let scores = self
            .scores
            .iter()
            .enumerate()
            .map(|(p, &v)| f(p % self.k, v))
            .collect();
        Self::new(self.task_names.clone(), self.n, scores)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    n: usize,
    k: usize,
    task_names: Vec<String>,
}

/// Path of the JSON sidecar accompanying a score table container.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes the binary64 container at `path` and its JSON sidecar next to it.
pub fn write_score_table(table: &ScoreTable, path: &Path) -> Result<()> {
    let dim = u32::try_from(table.k)
        .map_err(|_| Error::InvalidHeader("task count exceeds u32".into()))?;
    let header = Header {
        dtype: Dtype::F64,
        dim,
        count: table.n as u64,
    };
    let payload: Vec<u8> = table.scores.iter().flat_map(|v| v.to_le_bytes()).collect();
    container::write_container(path, header, &payload)?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&Sidecar {
        n: table.n,
        k: table.k,
        task_names: table.task_names.clone(),
    })
    .expect("sidecar serializes");
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

pub fn read_score_table(path: &Path) -> Result<ScoreTable> {
    let (header, payload) = container::read_container(path, Dtype::F64)?;
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: Sidecar = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: side.clone(),
        source,
    })?;
    if meta.k != header.dim as usize
        || meta.n as u64 != header.count
        || meta.task_names.len() != meta.k
    {
        return Err(Error::InvalidHeader(format!(
            "sidecar describes {}x{} with {} names, container holds {}x{}",
            meta.n,
            meta.k,
            meta.task_names.len(),
            header.count,
            header.dim
        )));
    }
    let scores = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScoreTable::new(meta.task_names, meta.n, scores)
}
