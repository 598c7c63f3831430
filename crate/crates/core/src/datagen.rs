//! Seeded simulation datasets.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gmm::MixtureModel;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: Matrix,
    pub labels: Vec<usize>,
    /// Probe observations: the mirror centre point or the cross-over
    /// group changers.
    pub special_indices: Vec<usize>,
}

impl LabeledDataset {
    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }
}

fn standard_normals(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draws `mean + L z` with `L` the lower Cholesky factor of the covariance.
struct Mvn {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl Mvn {
    fn new(mean: DVector<f64>, covariance: &DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(covariance.clone()).ok_or_else(|| {
            Error::Numerical("sampling covariance is not positive definite".into())
        })?;
        Ok(Self {
            mean,
            factor: chol.l(),
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        &self.mean + &self.factor * standard_normals(rng, self.mean.len())
    }
}

/// Two antipodal groups plus an origin probe.
///
/// Rows `0..n_per_group` are draws from `N((7,...,7), I_p)`, rows
/// `n_per_group..2*n_per_group` are their negations, and the last row is
/// the origin.
pub fn generate_mirror(n_per_group: usize, p: usize, seed: u64) -> Result<LabeledDataset> {
    if n_per_group == 0 || p == 0 {
        return Err(Error::InvalidArgument(
            "mirror data needs n_per_group >= 1 and p >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per_group + 1;
    let mut data = Matrix::zeros(n, p);
    for i in 0..n_per_group {
        for j in 0..p {
            let v = 7.0 + rng.sample::<f64, _>(StandardNormal);
            data[(i, j)] = v;
            data[(n_per_group + i, j)] = -v;
        }
    }
    let mut labels = vec![0; n_per_group];
    labels.extend(std::iter::repeat_n(1, n_per_group));
    labels.push(0);
    Ok(LabeledDataset {
        data,
        labels,
        special_indices: vec![n - 1],
    })
}

/// Group mean paths of the cross-over design: group one rises by one per
/// step from -20, group two falls by one per step from 20.
pub fn cross_over_means(time_points: usize) -> (DVector<f64>, DVector<f64>) {
    let up = DVector::from_fn(time_points, |t, _| -20.0 + t as f64);
    let down = DVector::from_fn(time_points, |t, _| 20.0 - t as f64);
    (up, down)
}

/// Mean path of a group changer: group one for the first `T / 2` time
/// points, group two afterwards.
pub fn changer_mean(time_points: usize) -> DVector<f64> {
    let (up, down) = cross_over_means(time_points);
    let switch = time_points / 2;
    DVector::from_fn(time_points, |t, _| if t < switch { up[t] } else { down[t] })
}

/// Compound-symmetric covariance: 1 on the diagonal, 0.9 elsewhere.
pub fn cross_over_covariance(time_points: usize) -> DMatrix<f64> {
    DMatrix::from_fn(
        time_points,
        time_points,
        |i, j| if i == j { 1.0 } else { 0.9 },
    )
}

/// Longitudinal two-group data whose means cross at the midpoint, plus
/// `n_changers` observations that switch groups at the crossing.
///
/// Row order: group one, group two, changers (labelled with group one).
pub fn generate_cross_over(
    n_per_group: usize,
    time_points: usize,
    n_changers: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if time_points < 2 || n_per_group == 0 {
        return Err(Error::InvalidArgument(
            "cross-over data needs at least 2 time points and 1 observation per group".into(),
        ));
    }
    let (up, down) = cross_over_means(time_points);
    let cov = cross_over_covariance(time_points);
    let groups = [
        Mvn::new(up, &cov)?,
        Mvn::new(down, &cov)?,
        Mvn::new(changer_mean(time_points), &cov)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * n_per_group + n_changers;
    let mut data = Matrix::zeros(n, time_points);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (src, label) = if i < n_per_group {
            (0, 0)
        } else if i < 2 * n_per_group {
            (1, 1)
        } else {
            (2, 0)
        };
        data.set_row(i, &groups[src].sample(&mut rng).transpose());
        labels.push(label);
    }
    Ok(LabeledDataset {
        data,
        labels,
        special_indices: (2 * n_per_group..n).collect(),
    })
}

/// `n` draws from a Gaussian mixture; labels record the drawn component.
pub fn generate_gmm(model: &MixtureModel, n: usize, seed: u64) -> Result<LabeledDataset> {
    let samplers = model
        .components()
        .iter()
        .map(|c| Mvn::new(c.mean.clone(), &c.covariance))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = model.components().iter().map(|c| c.weight).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Matrix::zeros(n, model.dimension());
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut g = weights.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                g = k;
                break;
            }
        }
        data.set_row(i, &samplers[g].sample(&mut rng).transpose());
        labels.push(g);
    }
    Ok(LabeledDataset {
        data,
        labels,
        special_indices: Vec::new(),
    })
}

/// Well-separated spherical mixture: `groups` equally sized clusters in
/// `dim` dimensions with unit noise. Group `g` is centred on axis `g` at
/// distance `separation * (1 + g/2) / sqrt(2)` from the origin, so every pair
/// of means is at least `separation` apart and the leading singular values
/// stay distinct (a symmetric layout makes the spectral basis ill-defined).
pub fn generate_separated(
    n: usize,
    dim: usize,
    groups: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if groups == 0 || groups > dim {
        return Err(Error::InvalidArgument(format!(
            "cannot place {groups} separated groups in {dim} dimensions"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Matrix::zeros(n, dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let g = i * groups / n;
        let mut x = standard_normals(&mut rng, dim);
        x[g] += separation * (1.0 + g as f64 / 2.0) / std::f64::consts::SQRT_2;
        data.set_row(i, &x.transpose());
        labels.push(g);
    }
    Ok(LabeledDataset {
        data,
        labels,
        special_indices: Vec::new(),
    })
}
