//! External validity measures against ground-truth labels.

use crate::bootstrap::next_permutation;
use crate::error::{Error, Result};

/// Counts of (true label, estimated label) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
}

impl ContingencyTable {
    pub fn new(true_labels: &[usize], est_labels: &[usize]) -> Result<Self> {
        if true_labels.len() != est_labels.len() {
            return Err(Error::Dimension(format!(
                "label vectors differ in length ({} vs {})",
                true_labels.len(),
                est_labels.len()
            )));
        }
        let rows = true_labels.iter().max().map_or(0, |m| m + 1);
        let cols = est_labels.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0; cols]; rows];
        for (&t, &e) in true_labels.iter().zip(est_labels) {
            counts[t][e] += 1;
        }
        Ok(Self { counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

/// Largest fraction of agreement over all one-to-one relabelings.
pub fn classification_rate(true_labels: &[usize], est_labels: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(true_labels, est_labels)?;
    let n = table.total();
    if n == 0 {
        return Err(Error::InvalidArgument("no labels to compare".into()));
    }
    let k = table
        .counts
        .len()
        .max(table.counts.first().map_or(0, Vec::len));
    let mut square = vec![vec![0.0; k]; k];
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            square[i][j] = c as f64;
        }
    }
    let matched = if k <= 8 {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = 0.0f64;
        loop {
            best = best.max(perm.iter().enumerate().map(|(i, &j)| square[i][j]).sum());
            if !next_permutation(&mut perm) {
                break;
            }
        }
        best
    } else {
        max_assignment(&square)
    };
    Ok(matched / n as f64)
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method).
fn max_assignment(weights: &[Vec<f64>]) -> f64 {
    let k = weights.len();
    let max = weights.iter().flatten().copied().fold(0.0, f64::max);
    // minimise (max - w) with 1-based potentials
    let cost = |i: usize, j: usize| max - weights[i - 1][j - 1];
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=k).map(|j| weights[p[j] - 1][j - 1]).sum()
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Hubert-Arabie adjusted Rand index. When both partitions put every
/// point in a single cluster the index is undefined; 1.0 is returned.
pub fn adjusted_rand_index(true_labels: &[usize], est_labels: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(true_labels, est_labels)?;
    let n = table.total();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "ARI needs at least two observations".into(),
        ));
    }
    let index: f64 = table.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let row_sums: f64 = table.counts.iter().map(|r| choose2(r.iter().sum())).sum();
    let cols = table.counts.first().map_or(0, Vec::len);
    let col_sums: f64 = (0..cols)
        .map(|j| choose2(table.counts.iter().map(|r| r[j]).sum()))
        .sum();
    let expected = row_sums * col_sums / choose2(n);
    let max_index = 0.5 * (row_sums + col_sums);
    let denom = max_index - expected;
    if denom.abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}
