use super::threshold::desc;
use super::Strategy;
use crate::datastore::ScoreTable;
use crate::error::{Error, Result};
use crate::selection::{Provenance, SelectionResult};

/// 1-based per-task ranks (1 = highest score), ties broken by ascending id so
/// every column is a permutation of `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankTable {
    n: usize,
    k: usize,
    ranks: Vec<usize>,
    orders: Vec<Vec<usize>>,
}

impl RankTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rank(&self, i: usize, task: usize) -> usize {
        self.ranks[i * self.k + task]
    }

    pub fn ranks_of(&self, i: usize) -> &[usize] {
        &self.ranks[i * self.k..(i + 1) * self.k]
    }

    /// Example ids of `task` from rank 1 down.
    pub fn order(&self, task: usize) -> &[usize] {
        &self.orders[task]
    }

    pub fn column(&self, task: usize) -> Vec<usize> {
        (0..self.n).map(|i| self.rank(i, task)).collect()
    }

    /// Within-task rank percentile, `1 - (rank - 1) / n`, in `(0, 1]`.
    pub fn percentile(&self, i: usize, task: usize) -> f64 {
        1.0 - (self.rank(i, task) - 1) as f64 / self.n as f64
    }
}

pub fn rank_table(table: &ScoreTable) -> RankTable {
    let (n, k) = (table.n(), table.k());
    let mut ranks = vec![0; n * k];
    let orders = (0..k)
        .map(|t| {
            let col = table.column(t);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| desc(col[a], col[b]).then(a.cmp(&b)));
            for (pos, &i) in order.iter().enumerate() {
                ranks[i * k + t] = pos + 1;
            }
            order
        })
        .collect();
    RankTable {
        n,
        k,
        ranks,
        orders,
    }
}

fn check_size(table: &ScoreTable, m: usize) -> Result<()> {
    if m > table.n() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {m} of {} examples",
            table.n()
        )));
    }
    Ok(())
}

/// Visits tasks cyclically in table order; each visit adds that task's
/// best-ranked example not yet selected. Provenance records the rank and the
/// picking task.
pub fn round_robin_select(table: &ScoreTable, m: usize) -> Result<SelectionResult> {
    check_size(table, m)?;
    let ranks = rank_table(table);
    let mut taken = vec![false; table.n()];
    let mut cursor = vec![0usize; table.k()];
    let mut selected = Vec::with_capacity(m);
    let mut provenance = Vec::with_capacity(m);
    let mut task = 0;
    while selected.len() < m {
        let order = ranks.order(task);
        while taken[order[cursor[task]]] {
            cursor[task] += 1;
        }
        let id = order[cursor[task]];
        taken[id] = true;
        selected.push(id);
        provenance.push(Provenance {
            id,
            key: (cursor[task] + 1) as f64,
            tie_break: task as f64,
        });
        task = (task + 1) % table.k();
    }
    Ok(SelectionResult::new(Strategy::RoundRobin.name(), m, selected, provenance))
}

/// Selects the `m` examples with the smallest best rank over tasks; ties go
/// to the smaller second-best rank, then the smaller id.
pub fn minrank_select(table: &ScoreTable, m: usize) -> Result<SelectionResult> {
    check_size(table, m)?;
    let ranks = rank_table(table);
    let keys: Vec<(usize, usize)> = (0..table.n())
        .map(|i| {
            let mut best = usize::MAX;
            let mut second = usize::MAX;
            for &r in ranks.ranks_of(i) {
                if r < best {
                    second = best;
                    best = r;
                } else if r < second {
                    second = r;
                }
            }
            (best, second)
        })
        .collect();
    let mut order: Vec<usize> = (0..table.n()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
    order.truncate(m);
    let provenance = order
        .iter()
        .map(|&id| Provenance {
            id,
            key: keys[id].0 as f64,
            tie_break: if keys[id].1 == usize::MAX {
                f64::INFINITY
            } else {
                keys[id].1 as f64
            },
        })
        .collect();
    Ok(SelectionResult::new(Strategy::MinRank.name(), m, order, provenance))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(cols: &[Vec<f64>]) -> ScoreTable {
        let names = (0..cols.len()).map(|i| format!("t{i}")).collect();
        ScoreTable::from_columns(names, cols).unwrap()
    }

    #[test]
    fn ranks() {
        assert_eq!(rank_table(&table(&[vec![0.9, 0.1, 0.5]])).column(0), vec![1, 3, 2]);
        assert_eq!(rank_table(&table(&[vec![0.5, 0.5]])).column(0), vec![1, 2]);
    }

    #[test]
    fn round_robin_alternates_on_disjoint_tops() {
        let t = table(&[
            vec![0.9, 0.8, 0.1, 0.0, 0.5, 0.4],
            vec![0.0, 0.1, 0.9, 0.8, 0.4, 0.5],
        ]);
        let s = round_robin_select(&t, 4).unwrap();
        assert_eq!(s.selected, vec![0, 2, 1, 3]);
        let tasks: Vec<_> = s.provenance.iter().map(|p| p.tie_break).collect();
        assert_eq!(tasks, vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn round_robin_skips_taken() {
        let mut a = vec![0.0; 10];
        let mut b = vec![0.0; 10];
        for i in 0..10 {
            a[i] = i as f64 * 0.01;
            b[i] = 0.5 - i as f64 * 0.01;
        }
        a[7] = 1.0;
        b[7] = 1.0;
        let s = round_robin_select(&table(&[a, b]), 2).unwrap();
        assert_eq!(s.selected, vec![7, 0]);
    }

    #[test]
    fn minrank_includes_every_task_top() {
        let t = table(&[
            vec![0.9, 0.2, 0.3, 0.4],
            vec![0.1, 0.2, 0.8, 0.4],
            vec![0.1, 0.7, 0.3, 0.4],
        ]);
        let s = minrank_select(&t, 3).unwrap();
        let mut sel = s.selected.clone();
        sel.sort();
        assert_eq!(sel, vec![0, 1, 2]);
    }

    #[test]
    fn oversize_rejected() {
        let t = table(&[vec![0.1, 0.2]]);
        assert!(round_robin_select(&t, 3).is_err());
        assert!(minrank_select(&t, 3).is_err());
    }
}
