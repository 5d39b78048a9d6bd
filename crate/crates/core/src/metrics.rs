//! External clustering metrics: purity, accuracy under the best one-to-one
//! label mapping, and pair-counting F1.

use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};

/// Counts `|predicted cluster i ∩ true class j|`. Labels are compacted to
/// `0..n` in order of first appearance, so arbitrary label values work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    n_true: usize,
    total: u64,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen: Vec<(usize, usize)> = Vec::new();
    let ids = labels
        .iter()
        .map(|&l| match seen.iter().find(|(v, _)| *v == l) {
            Some(&(_, id)) => id,
            None => {
                seen.push((l, seen.len()));
                seen.len() - 1
            }
        })
        .collect();
    (ids, seen.len())
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        check_dim("truth length", pred.len(), truth.len())?;
        if pred.is_empty() {
            return Err(Error::EmptyInput("no labels to compare"));
        }
        let (p, n_pred) = compact(pred);
        let (t, n_true) = compact(truth);
        let mut counts = alloc::vec![alloc::vec![0u64; n_true]; n_pred];
        for (&i, &j) in p.iter().zip(&t) {
            counts[i][j] += 1;
        }
        Ok(Self {
            counts,
            n_true,
            total: pred.len() as u64,
        })
    }

    pub fn n_pred(&self) -> usize {
        self.counts.len()
    }

    pub fn n_true(&self) -> usize {
        self.n_true
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, pred: usize, truth: usize) -> u64 {
        self.counts[pred][truth]
    }
}

/// Fraction of instances belonging to the majority true class of their cluster.
pub fn purity(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let hits: u64 = table
        .counts
        .iter()
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(hits as f64 / table.total as f64)
}

/// Minimum-cost perfect matching on a square cost matrix (Kuhn–Munkres with
/// potentials, O(n³)). Returns `assignment[row] = column` and the total cost
/// summed in row order.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = cost.len();
    for row in cost {
        check_dim("cost matrix must be square", n, row.len())?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cost matrix"));
        }
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    // 1-based bookkeeping; column 0 is a virtual start.
    let mut u = alloc::vec![0.0; n + 1];
    let mut v = alloc::vec![0.0; n + 1];
    let mut matched_row = alloc::vec![0usize; n + 1];
    let mut way = alloc::vec![0usize; n + 1];
    for row in 1..=n {
        matched_row[0] = row;
        let mut col0 = 0;
        let mut min_v = alloc::vec![f64::INFINITY; n + 1];
        let mut used = alloc::vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = matched_row[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r - 1][col - 1] - u[r] - v[col];
                if reduced < min_v[col] {
                    min_v[col] = reduced;
                    way[col] = col0;
                }
                if min_v[col] < delta {
                    delta = min_v[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[matched_row[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_v[col] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            matched_row[col0] = matched_row[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = alloc::vec![0usize; n];
    for col in 1..=n {
        assignment[matched_row[col] - 1] = col - 1;
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| cost[r][c])
        .sum();
    Ok((assignment, total))
}

/// Best-mapping accuracy; the contingency table is zero-padded to square and
/// the mapping found by [`hungarian`] on negated counts.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let size = table.n_pred().max(table.n_true());
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    if i < table.n_pred() && j < table.n_true() {
                        -(table.get(i, j) as f64)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let (_, total) = hungarian(&cost)?;
    Ok(-total / table.total as f64)
}

/// Pair-counting confusion counts over all unordered instance pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: PairCounts,
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

pub fn pair_counts(pred: &[usize], truth: &[usize]) -> Result<PairCounts> {
    let table = ContingencyTable::new(pred, truth)?;
    let same_both: u64 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let same_pred: u64 = table.counts.iter().map(|row| pairs(row.iter().sum())).sum();
    let same_true: u64 = (0..table.n_true())
        .map(|j| pairs(table.counts.iter().map(|row| row[j]).sum()))
        .sum();
    let all = pairs(table.total);
    Ok(PairCounts {
        true_positive: same_both,
        false_positive: same_pred - same_both,
        false_negative: same_true - same_both,
        true_negative: all + same_both - same_pred - same_true,
    })
}

/// Pairwise precision, recall and their harmonic mean. Precision (recall) is
/// 0 when no pair is predicted (truly) together; F1 is 0 when both are 0.
pub fn pairwise_f1(pred: &[usize], truth: &[usize]) -> Result<PairwiseScores> {
    if pred.len() < 2 {
        return Err(Error::EmptyInput(
            "pairwise F1 needs at least two instances",
        ));
    }
    let counts = pair_counts(pred, truth)?;
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(
        counts.true_positive,
        counts.true_positive + counts.false_positive,
    );
    let recall = ratio(
        counts.true_positive,
        counts.true_positive + counts.false_negative,
    );
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PairwiseScores {
        precision,
        recall,
        f1,
        counts,
    })
}
