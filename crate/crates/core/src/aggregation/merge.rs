use serde::{Deserialize, Serialize};

use super::threshold::desc;
use super::{Strategy, DEGENERATE_EPS};
use crate::datastore::ScoreTable;

/// Per-example aggregate keys and the induced preference order (descending
/// key, ascending id on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRanking {
    pub strategy: Strategy,
    pub keys: Vec<f64>,
    pub order: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AggregateRanking {
    pub(crate) fn from_keys(strategy: Strategy, keys: Vec<f64>, warnings: Vec<String>) -> Self {
        let mut order: Vec<usize> = (0..keys.len()).collect();
        order.sort_by(|&a, &b| desc(keys[a], keys[b]).then(a.cmp(&b)));
        for w in &warnings {
            log::warn!("{strategy}: {w}");
        }
        AggregateRanking {
            strategy,
            keys,
            order,
            warnings,
        }
    }

    pub fn top(&self, m: usize) -> &[usize] {
        &self.order[..m.min(self.order.len())]
    }
}

fn row_keys(table: &ScoreTable, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    (0..table.n()).map(|i| f(table.row(i))).collect()
}

/// Sum of per-task scores.
pub fn merge_scores(table: &ScoreTable) -> AggregateRanking {
    let keys = row_keys(table, |r| r.iter().fold(0.0, |a, &b| a + b));
    AggregateRanking::from_keys(Strategy::Merge, keys, Vec::new())
}

/// Highest score on any task.
pub fn max_scores(table: &ScoreTable) -> AggregateRanking {
    let keys = row_keys(table, |r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    AggregateRanking::from_keys(Strategy::Max, keys, Vec::new())
}

/// Sum of per-task scores, each column divided by its own sum. Columns whose
/// sum is within `DEGENERATE_EPS` of zero are used unnormalized.
pub fn merge_sumnorm(table: &ScoreTable) -> AggregateRanking {
    let mut warnings = Vec::new();
    let divisors: Vec<f64> = (0..table.k())
        .map(|t| {
            let sum = table.column(t).iter().fold(0.0, |a, &b| a + b);
            let name = &table.task_names()[t];
            if sum.abs() < DEGENERATE_EPS {
                warnings.push(format!(
                    "task {name:?} sums to {sum:e}; left unnormalized"
                ));
                1.0
            } else {
                if sum < 0.0 {
                    warnings.push(format!(
                        "task {name:?} has negative sum {sum:e}; its ordering is inverted"
                    ));
                }
                sum
            }
        })
        .collect();
    let keys = row_keys(table, |r| {
        r.iter().zip(&divisors).fold(0.0, |a, (&s, &d)| a + s / d)
    });
    AggregateRanking::from_keys(Strategy::MergeSumNorm, keys, warnings)
}

/// Sum of per-task z-scores using population mean and deviation. Columns with
/// deviation below `DEGENERATE_EPS` contribute zero.
pub fn merge_gausnorm(table: &ScoreTable) -> AggregateRanking {
    let n = table.n() as f64;
    let stats: Vec<Option<(f64, f64)>> = (0..table.k())
        .map(|t| {
            let col = table.column(t);
            let mean = col.iter().fold(0.0, |a, &b| a + b) / n;
            let var = col.iter().fold(0.0, |a, &b| a + (b - mean) * (b - mean)) / n;
            let sd = var.sqrt();
            (sd >= DEGENERATE_EPS).then_some((mean, sd))
        })
        .collect();
    let keys = row_keys(table, |r| {
        r.iter().zip(&stats).fold(0.0, |a, (&s, st)| match st {
            Some((mean, sd)) => a + (s - mean) / sd,
            None => a,
        })
    });
    AggregateRanking::from_keys(Strategy::MergeGausNorm, keys, Vec::new())
}
