use serde::{Deserialize, Serialize};

use crate::datastore::ScoreTable;
use crate::error::{Error, Result};

/// `ceil(p * n)`, clamped to `1..=n`.
///
/// Products within 1e-9 (relative) of an integer are snapped to it first, so
/// that e.g. `0.7 * 10` gives 7 rather than 8.
pub fn selection_size(n: usize, p: f64) -> Result<usize> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio {p} is outside (0, 1]"
        )));
    }
    if n == 0 {
        return Err(Error::Empty("no training examples".into()));
    }
    let x = p * n as f64;
    let nearest = x.round();
    let r = if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    Ok((r as usize).clamp(1, n))
}

/// Descending order on finite scores (`-0.0 == 0.0`, matching `>=`).
pub(crate) fn desc(a: f64, b: f64) -> std::cmp::Ordering {
    b.partial_cmp(&a).expect("score tables hold finite values")
}

/// Per-task nearest-rank cutoffs: `taus[k]` is the `rank`-th largest score
/// of column `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub ratio: f64,
    pub rank: usize,
    pub taus: Vec<f64>,
}

pub fn thresholds(table: &ScoreTable, p: f64) -> Result<ThresholdSet> {
    let rank = selection_size(table.n(), p)?;
    let taus = (0..table.k())
        .map(|t| {
            let mut col = table.column(t);
            let (_, tau, _) = col.select_nth_unstable_by(rank - 1, |a, b| desc(*a, *b));
            *tau
        })
        .collect();
    Ok(ThresholdSet {
        ratio: p,
        rank,
        taus,
    })
}

/// Number of tasks placing each example at or above their threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTally {
    pub votes: Vec<u32>,
    pub k: usize,
    pub thresholds: ThresholdSet,
}

impl VoteTally {
    /// `histogram[v]` is the number of examples with exactly `v` votes.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.k + 1];
        for &v in &self.votes {
            h[v as usize] += 1;
        }
        h
    }

    pub fn total(&self) -> u64 {
        self.votes.iter().map(|&v| u64::from(v)).sum()
    }
}

pub fn vote_tally(table: &ScoreTable, thresholds: &ThresholdSet) -> Result<VoteTally> {
    if thresholds.taus.len() != table.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} thresholds for {} tasks",
            thresholds.taus.len(),
            table.k()
        )));
    }
    let votes = (0..table.n())
        .map(|i| {
            table
                .row(i)
                .iter()
                .zip(&thresholds.taus)
                .filter(|(s, tau)| s >= tau)
                .count() as u32
        })
        .collect();
    Ok(VoteTally {
        votes,
        k: table.k(),
        thresholds: thresholds.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: &[Vec<f64>]) -> ScoreTable {
        let names = (0..cols.len()).map(|i| format!("t{i}")).collect();
        ScoreTable::from_columns(names, cols).unwrap()
    }

    #[test]
    fn size_rule() {
        assert_eq!(selection_size(5, 0.4).unwrap(), 2);
        assert_eq!(selection_size(10, 0.7).unwrap(), 7);
        assert_eq!(selection_size(10, 0.71).unwrap(), 8);
        assert_eq!(selection_size(2000, 0.2).unwrap(), 400);
        assert_eq!(selection_size(665_298, 0.2).unwrap(), 133_060);
        assert_eq!(selection_size(3, 0.01).unwrap(), 1);
        assert!(selection_size(3, 0.0).is_err());
        assert!(selection_size(3, 1.5).is_err());
        assert!(selection_size(0, 0.5).is_err());
    }

    #[test]
    fn worked_threshold() {
        let t = table(&[vec![0.9, 0.1, 0.5, 0.8, 0.2]]);
        let th = thresholds(&t, 0.4).unwrap();
        assert_eq!(th.rank, 2);
        assert_eq!(th.taus, vec![0.8]);
        assert_eq!(thresholds(&t, 1.0).unwrap().taus, vec![0.1]);
    }

    #[test]
    fn ties_all_qualify() {
        let t = table(&[vec![0.3; 6]]);
        for p in [0.1, 0.5, 1.0] {
            let th = thresholds(&t, p).unwrap();
            assert_eq!(th.taus, vec![0.3]);
            assert_eq!(vote_tally(&t, &th).unwrap().votes, vec![1; 6]);
        }
    }

    #[test]
    fn worked_votes() {
        let t = table(&[
            vec![0.9, 0.1, 0.5, 0.8, 0.2],
            vec![0.15, 0.7, 0.6, 0.9, 0.1],
        ]);
        let tally = vote_tally(&t, &thresholds(&t, 0.4).unwrap()).unwrap();
        assert_eq!(tally.votes, vec![1, 1, 0, 2, 0]);
        assert_eq!(tally.histogram(), vec![2, 2, 1]);
        let all = vote_tally(&t, &thresholds(&t, 1.0).unwrap()).unwrap();
        assert_eq!(all.votes, vec![2; 5]);
    }

    #[test]
    fn shape_mismatch() {
        let t = table(&[vec![1.0, 2.0]]);
        let th = ThresholdSet {
            ratio: 0.5,
            rank: 1,
            taus: vec![1.0, 1.0],
        };
        assert!(vote_tally(&t, &th).is_err());
    }
}
