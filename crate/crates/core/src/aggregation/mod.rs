//! Cross-task aggregation of a [`ScoreTable`](crate::datastore::ScoreTable):
//! percentile thresholds and votes, score merging, and rank-based schemes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

mod merge;
mod rank;
mod threshold;

pub use merge::{max_scores, merge_gausnorm, merge_scores, merge_sumnorm, AggregateRanking};
pub use rank::{minrank_select, rank_table, round_robin_select, RankTable};
pub use threshold::{selection_size, thresholds, vote_tally, ThresholdSet, VoteTally};

/// Normalization sums (SumNorm) and deviations (GausNorm) below this are
/// treated as degenerate.
pub const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "vote")]
    Vote,
    #[serde(rename = "merge")]
    Merge,
    #[serde(rename = "max")]
    Max,
    #[serde(rename = "merge-sumnorm")]
    MergeSumNorm,
    #[serde(rename = "merge-gausnorm")]
    MergeGausNorm,
    #[serde(rename = "roundrobin")]
    RoundRobin,
    #[serde(rename = "minrank")]
    MinRank,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Vote,
        Strategy::Merge,
        Strategy::Max,
        Strategy::MergeSumNorm,
        Strategy::MergeGausNorm,
        Strategy::RoundRobin,
        Strategy::MinRank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Vote => "vote",
            Strategy::Merge => "merge",
            Strategy::Max => "max",
            Strategy::MergeSumNorm => "merge-sumnorm",
            Strategy::MergeGausNorm => "merge-gausnorm",
            Strategy::RoundRobin => "roundrobin",
            Strategy::MinRank => "minrank",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Strategy::ALL.iter().map(|s| s.name()).collect();
                Error::InvalidArgument(format!(
                    "unknown strategy {s:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}
