use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::shard::shard_header;
use crate::error::{Error, Result};
use crate::projection::ProjectionSpec;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainShardEntry {
    pub path: String,
    pub count: u64,
    pub base_id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub name: String,
    pub val_shard: String,
    pub count: u64,
}

/// Describes a training pool and its target tasks. Shard paths are relative
/// to the directory holding the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub feature_dim: usize,
    pub projection: Option<ProjectionSpec>,
    pub train_shards: Vec<TrainShardEntry>,
    pub tasks: Vec<TaskEntry>,
    pub normalized: bool,
    #[serde(skip)]
    root: PathBuf,
}

impl Manifest {
    pub fn new(feature_dim: usize, root: impl Into<PathBuf>) -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            feature_dim,
            projection: None,
            train_shards: Vec::new(),
            tasks: Vec::new(),
            normalized: false,
            root: root.into(),
        }
    }

    /// Appends a training shard, assigning the next contiguous base id.
    pub fn push_train_shard(&mut self, path: impl Into<String>, count: u64) {
        let base_id = self.train_count();
        self.train_shards.push(TrainShardEntry {
            path: path.into(),
            count,
            base_id,
        });
    }

    pub fn push_task(&mut self, name: impl Into<String>, val_shard: impl Into<String>, count: u64) {
        self.tasks.push(TaskEntry {
            name: name.into(),
            val_shard: val_shard.into(),
            count,
        });
    }

    pub fn train_count(&self) -> u64 {
        self.train_shards.iter().map(|s| s.count).sum()
    }

    pub fn task_names(&self) -> Vec<String> {
        self.tasks.iter().map(|t| t.name.clone()).collect()
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn set_root(&mut self, root: impl Into<PathBuf>) {
        self.root = root.into();
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Checks the structural invariants that need no file access.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidManifest(m));
        if self.version != MANIFEST_VERSION {
            return bad(format!("unsupported manifest version {}", self.version));
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be at least 1".into());
        }
        if self.tasks.is_empty() {
            return bad("at least one task is required".into());
        }
        let mut seen = HashSet::new();
        for t in &self.tasks {
            if !seen.insert(t.name.as_str()) {
                return bad(format!("duplicate task name {:?}", t.name));
            }
        }
        let mut next = 0u64;
        for s in &self.train_shards {
            if s.base_id != next {
                return bad(format!(
                    "train shard {} has base_id {}, expected {next}",
                    s.path, s.base_id
                ));
            }
            next += s.count;
        }
        if let Some(p) = &self.projection {
            if p.out_dim != self.feature_dim {
                return bad(format!(
                    "projection out_dim {} differs from feature_dim {}",
                    p.out_dim, self.feature_dim
                ));
            }
        }
        Ok(())
    }

    /// Validates invariants and cross-checks every shard header against the
    /// manifest's counts and feature dimension.
    pub fn validate_files(&self) -> Result<()> {
        self.validate()?;
        let check = |rel: &str, count: u64| -> Result<()> {
            let h = shard_header(&self.resolve(rel))?;
            if h.dim as usize != self.feature_dim {
                return Err(Error::InvalidManifest(format!(
                    "{rel}: dim {} differs from feature_dim {}",
                    h.dim, self.feature_dim
                )));
            }
            if h.count != count {
                return Err(Error::InvalidManifest(format!(
                    "{rel}: header count {} differs from manifest count {count}",
                    h.count
                )));
            }
            Ok(())
        };
        for s in &self.train_shards {
            check(&s.path, s.count)?;
        }
        for t in &self.tasks {
            check(&t.val_shard, t.count)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        m.root = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}
