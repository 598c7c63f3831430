//! Seeded k-means used to build initial memberships.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::Matrix;

pub const MAX_ITER: usize = 50;
pub const DEFAULT_RESTARTS: usize = 5;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
}

/// Best of `restarts` k-means++ seeded Lloyd runs (lowest inertia).
pub fn kmeans(data: &Matrix, k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    let n = data.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form {k} clusters from {n} observations"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..restarts.max(1) {
        let fit = lloyd(data, plus_plus(data, k, &mut rng), &mut rng);
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(data: &Matrix, i: usize, centroids: &Matrix, c: usize) -> f64 {
    data.row(i)
        .iter()
        .zip(centroids.row(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn plus_plus(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let (n, d) = data.shape();
    let mut centroids = Matrix::zeros(k, d);
    centroids.set_row(0, &data.row(rng.random_range(0..n)));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(data, i, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, w) in nearest.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.set_row(c, &data.row(pick));
        for (i, best) in nearest.iter_mut().enumerate() {
            *best = best.min(sq_dist(data, i, &centroids, c));
        }
    }
    centroids
}

fn lloyd(data: &Matrix, mut centroids: Matrix, rng: &mut ChaCha8Rng) -> KMeansFit {
    let (n, d) = data.shape();
    let k = centroids.nrows();
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    for iter in 0..MAX_ITER {
        let mut changed = false;
        for i in 0..n {
            let (mut best, mut best_d) = (0, f64::INFINITY);
            for c in 0..k {
                let dd = sq_dist(data, i, &centroids, c);
                if dd < best_d {
                    best = c;
                    best_d = dd;
                }
            }
            if labels[i] != best {
                changed = true;
            }
            labels[i] = best;
            dists[i] = best_d;
        }
        if !changed && iter > 0 {
            break;
        }
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let mut row = sums.row_mut(labels[i]);
            row += data.row(i);
            counts[labels[i]] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count == 0 {
                // reseed an empty cluster at the worst-served point
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or_else(|| rng.random_range(0..n));
                centroids.set_row(c, &data.row(far));
                dists[far] = 0.0;
                labels[far] = c;
            } else {
                centroids.set_row(c, &(sums.row(c) / count as f64));
            }
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(data, i, &centroids, labels[i]))
        .sum();
    KMeansFit {
        labels,
        centroids,
        inertia,
    }
}
