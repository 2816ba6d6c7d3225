//! Training-data selection from gradient influence.
//!
//! Per-example gradient features are sketched with a seeded random
//! projection, normalized, and compared against each target task's
//! validation gradients. The resulting per-task mean influence table is
//! aggregated across tasks (percentile votes, score merges, or rank schemes)
//! into one subset.

pub mod aggregation;
pub mod datastore;
pub mod error;
pub mod influence;
pub mod projection;
pub mod selection;
pub mod synth;

pub use aggregation::{Strategy, ThresholdSet, VoteTally};
pub use datastore::{FeatureShard, Manifest, ScoreTable};
pub use error::{Error, ErrorKind, Result};
pub use influence::{InfluenceMatrix, InnerProduct, TaskScores};
pub use projection::{ProjectionFamily, ProjectionSpec};
pub use selection::{SelectionResult, VoteStats};
