//! Final subset selection and the analyses built on it.

mod analysis;

use serde::{Deserialize, Serialize};

use crate::aggregation::{
    max_scores, merge_gausnorm, merge_scores, merge_sumnorm, minrank_select, rank_table,
    round_robin_select, selection_size, thresholds, vote_tally, AggregateRanking, RankTable,
    Strategy, VoteTally,
};
use crate::datastore::ScoreTable;
use crate::error::{Error, Result};

pub use analysis::{
    rel_metric, specialist_overlap, vote_distribution_stats, EvalReport, OverlapReport,
    VoteStats, VoteStatsRow,
};

/// Why one example was selected: its primary key under the strategy (vote
/// count, aggregate score, or rank) and the secondary key used on ties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub id: usize,
    pub key: f64,
    pub tie_break: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub strategy: String,
    pub ratio: Option<f64>,
    pub size: usize,
    /// In selection order.
    pub selected: Vec<usize>,
    pub provenance: Vec<Provenance>,
    pub thresholds: Option<Vec<f64>>,
    pub vote_histogram: Option<Vec<usize>>,
    pub boundary_level: Option<u32>,
    pub seed: Option<u64>,
}

impl SelectionResult {
    pub fn new(
        strategy: &str,
        size: usize,
        selected: Vec<usize>,
        provenance: Vec<Provenance>,
    ) -> Self {
        SelectionResult {
            strategy: strategy.to_string(),
            ratio: None,
            size,
            selected,
            provenance,
            thresholds: None,
            vote_histogram: None,
            boundary_level: None,
            seed: None,
        }
    }

    /// Newline-delimited ids in selection order.
    pub fn ids_text(&self) -> String {
        let mut s = String::with_capacity(self.selected.len() * 7);
        for id in &self.selected {
            s.push_str(&id.to_string());
            s.push('\n');
        }
        s
    }

    /// The summary report: strategy, p, M, thresholds, vote histogram,
    /// boundary level and seed.
    pub fn report_json(&self) -> serde_json::Value {
        serde_json::json!({
            "strategy": self.strategy,
            "p": self.ratio,
            "M": self.size,
            "thresholds": self.thresholds,
            "vote_histogram": self.vote_histogram,
            "boundary_level": self.boundary_level,
            "seed": self.seed,
        })
    }

    pub fn sorted_ids(&self) -> Vec<usize> {
        let mut ids = self.selected.clone();
        ids.sort_unstable();
        ids
    }
}

/// Parses a newline-delimited id list, ignoring blank lines.
pub fn parse_ids(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad id line {l:?}")))
        })
        .collect()
}

/// Sum over tasks of within-task rank percentiles.
pub fn consensus_strength(ranks: &RankTable) -> Vec<f64> {
    (0..ranks.n())
        .map(|i| (0..ranks.k()).fold(0.0, |acc, t| acc + ranks.percentile(i, t)))
        .collect()
}

/// Takes every example above the boundary vote level, then fills from the
/// boundary level by descending consensus strength and ascending id.
pub fn select_by_votes(tally: &VoteTally, table: &ScoreTable, p: f64) -> Result<SelectionResult> {
    if tally.votes.len() != table.n() || tally.k != table.k() {
        return Err(Error::DimensionMismatch(format!(
            "tally for {}x{} does not match table {}x{}",
            tally.votes.len(),
            tally.k,
            table.n(),
            table.k()
        )));
    }
    if tally.thresholds.ratio != p {
        return Err(Error::InvalidArgument(format!(
            "tally computed at ratio {}, selection requested at {p}",
            tally.thresholds.ratio
        )));
    }
    let m = selection_size(table.n(), p)?;
    let strength = consensus_strength(&rank_table(table));
    let mut order: Vec<usize> = (0..table.n()).collect();
    order.sort_by(|&a, &b| {
        tally.votes[b]
            .cmp(&tally.votes[a])
            .then(strength[b].partial_cmp(&strength[a]).expect("finite strength"))
            .then(a.cmp(&b))
    });
    order.truncate(m);
    let boundary = tally.votes[order[m - 1]];
    let provenance = order
        .iter()
        .map(|&id| Provenance {
            id,
            key: f64::from(tally.votes[id]),
            tie_break: strength[id],
        })
        .collect();
    let mut result = SelectionResult::new(Strategy::Vote.name(), m, order, provenance);
    result.ratio = Some(p);
    result.thresholds = Some(tally.thresholds.taus.clone());
    result.vote_histogram = Some(tally.histogram());
    result.boundary_level = Some(boundary);
    Ok(result)
}

fn from_ranking(ranking: &AggregateRanking, m: usize) -> SelectionResult {
    let selected = ranking.top(m).to_vec();
    let provenance = selected
        .iter()
        .map(|&id| Provenance {
            id,
            key: ranking.keys[id],
            tie_break: id as f64,
        })
        .collect();
    SelectionResult::new(ranking.strategy.name(), m, selected, provenance)
}

/// Aggregate keys for a key-based strategy, or `None` for the purely
/// selection-based ones (vote, round robin, minrank).
pub fn aggregate(table: &ScoreTable, strategy: Strategy) -> Option<AggregateRanking> {
    match strategy {
        Strategy::Merge => Some(merge_scores(table)),
        Strategy::Max => Some(max_scores(table)),
        Strategy::MergeSumNorm => Some(merge_sumnorm(table)),
        Strategy::MergeGausNorm => Some(merge_gausnorm(table)),
        Strategy::Vote | Strategy::RoundRobin | Strategy::MinRank => None,
    }
}

/// Selects `ceil(p * n)` examples with any strategy.
pub fn select(table: &ScoreTable, p: f64, strategy: Strategy) -> Result<SelectionResult> {
    let m = selection_size(table.n(), p)?;
    let mut result = match strategy {
        Strategy::Vote => {
            let tally = vote_tally(table, &thresholds(table, p)?)?;
            return select_by_votes(&tally, table, p);
        }
        Strategy::RoundRobin => round_robin_select(table, m)?,
        Strategy::MinRank => minrank_select(table, m)?,
        other => from_ranking(&aggregate(table, other).expect("key-based strategy"), m),
    };
    result.ratio = Some(p);
    Ok(result)
}
