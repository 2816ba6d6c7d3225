use serde::{Deserialize, Serialize};

use super::{select_by_votes, SelectionResult};
use crate::aggregation::{rank_table, selection_size, thresholds, vote_tally};
use crate::datastore::ScoreTable;
use crate::error::{Error, Result};

/// Vote distribution at one selection ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteStatsRow {
    pub ratio: f64,
    pub mean: f64,
    pub std: f64,
    pub median: u32,
    pub max_votes: u32,
    pub zero_vote: f64,
    /// Boundary vote level of the vote selection at this ratio.
    pub threshold: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteStats {
    pub n: usize,
    pub k: usize,
    pub rows: Vec<VoteStatsRow>,
}

pub fn vote_distribution_stats(table: &ScoreTable, ratios: &[f64]) -> Result<VoteStats> {
    let rows = ratios
        .iter()
        .map(|&p| {
            let tally = vote_tally(table, &thresholds(table, p)?)?;
            let n = tally.votes.len() as f64;
            let mean = tally.votes.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
            let var = tally
                .votes
                .iter()
                .map(|&v| (f64::from(v) - mean).powi(2))
                .sum::<f64>()
                / n;
            let mut sorted = tally.votes.clone();
            sorted.sort_unstable();
            let zeros = sorted.iter().take_while(|&&v| v == 0).count();
            let selection = select_by_votes(&tally, table, p)?;
            Ok(VoteStatsRow {
                ratio: p,
                mean,
                std: var.sqrt(),
                median: sorted[(sorted.len() - 1) / 2],
                max_votes: *sorted.last().expect("non-empty table"),
                zero_vote: zeros as f64 / n,
                threshold: selection.boundary_level.expect("vote selection"),
            })
        })
        .collect::<Result<_>>()?;
    Ok(VoteStats {
        n: table.n(),
        k: table.k(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub ratio: f64,
    pub task_names: Vec<String>,
    /// `pairwise[a][b] = |S_a ∩ S_b| / |S_a|` over per-task top sets.
    pub pairwise: Vec<Vec<f64>>,
    /// `|S_k ∩ G| / |G|` for the generalist selection `G`.
    pub specialist_vs_generalist: Vec<f64>,
}

/// Overlap between per-task top-`ceil(pN)` sets and with a generalist
/// selection.
pub fn specialist_overlap(
    table: &ScoreTable,
    p: f64,
    generalist: &SelectionResult,
) -> Result<OverlapReport> {
    let r = selection_size(table.n(), p)?;
    let ranks = rank_table(table);
    let member: Vec<Vec<bool>> = (0..table.k())
        .map(|t| {
            let mut m = vec![false; table.n()];
            for &i in &ranks.order(t)[..r] {
                m[i] = true;
            }
            m
        })
        .collect();
    let pairwise = (0..table.k())
        .map(|a| {
            (0..table.k())
                .map(|b| {
                    let both = (0..table.n()).filter(|&i| member[a][i] && member[b][i]).count();
                    both as f64 / r as f64
                })
                .collect()
        })
        .collect();
    let g = &generalist.selected;
    if g.iter().any(|&i| i >= table.n()) {
        return Err(Error::InvalidArgument(
            "generalist selection holds ids outside the table".into(),
        ));
    }
    let specialist_vs_generalist = member
        .iter()
        .map(|m| {
            if g.is_empty() {
                0.0
            } else {
                g.iter().filter(|&&i| m[i]).count() as f64 / g.len() as f64
            }
        })
        .collect();
    Ok(OverlapReport {
        ratio: p,
        task_names: table.task_names().to_vec(),
        pairwise,
        specialist_vs_generalist,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub subset_scores: Vec<f64>,
    pub full_scores: Vec<f64>,
    pub rel: Vec<f64>,
    pub mean_rel: f64,
}

/// Per-task ratio of subset-trained to full-data score, and their mean.
pub fn rel_metric(subset_scores: &[f64], full_scores: &[f64]) -> Result<EvalReport> {
    if subset_scores.len() != full_scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} subset scores vs {} full scores",
            subset_scores.len(),
            full_scores.len()
        )));
    }
    if subset_scores.is_empty() {
        return Err(Error::Empty("no task scores".into()));
    }
    if let Some(bad) = full_scores.iter().find(|&&s| s.is_nan() || s <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "full-data score {bad} is not positive"
        )));
    }
    let rel: Vec<f64> = subset_scores
        .iter()
        .zip(full_scores)
        .map(|(s, f)| s / f)
        .collect();
    let mean_rel = rel.iter().sum::<f64>() / rel.len() as f64;
    Ok(EvalReport {
        subset_scores: subset_scores.to_vec(),
        full_scores: full_scores.to_vec(),
        rel,
        mean_rel,
    })
}
