//! Checksummed on-disk storage for feature shards, manifests and score
//! tables.

pub mod container;
mod manifest;
mod scores;
mod shard;

pub use container::{fnv1a64, Dtype, Fnv1a64, Header};
pub use manifest::{Manifest, TaskEntry, TrainShardEntry, MANIFEST_VERSION};
pub use scores::{read_score_table, sidecar_path, write_score_table, ScoreTable};
pub use shard::{
    read_shard, shard_header, stream_blocks, stream_blocks_from, write_shard, FeatureShard,
    ShardBlocks,
};
