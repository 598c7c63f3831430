//! Gaussian mixture representation and the EM building blocks.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans;
use crate::Matrix;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Responsibility mass below `EMPTY_FRACTION * n` marks a component as empty.
pub const EMPTY_FRACTION: f64 = 1e-8;

/// Ridge ladder for covariances that fail to factorize, relative to
/// `trace / d`.
const RIDGE_START: f64 = 1e-8;
const RIDGE_LIMIT: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    components: Vec<MixtureComponent>,
}

impl MixtureModel {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components.first().ok_or_else(|| {
            Error::InvalidArgument("a mixture needs at least one component".into())
        })?;
        let d = first.mean.len();
        if d == 0 {
            return Err(Error::Dimension(
                "components must have dimension >= 1".into(),
            ));
        }
        let mut total = 0.0;
        for (g, c) in components.iter().enumerate() {
            if c.mean.len() != d || c.covariance.shape() != (d, d) {
                return Err(Error::Dimension(format!(
                    "component {g} does not have dimension {d}"
                )));
            }
            if !(c.weight > 0.0 && c.weight <= 1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "component {g} has weight {} outside (0, 1]",
                    c.weight
                )));
            }
            if c.mean
                .iter()
                .chain(c.covariance.iter())
                .any(|v| !v.is_finite())
            {
                return Err(Error::Numerical(format!(
                    "component {g} has non-finite parameters"
                )));
            }
            let scale = c.covariance.amax().max(1.0);
            for i in 0..d {
                for j in 0..i {
                    if (c.covariance[(i, j)] - c.covariance[(j, i)]).abs() > 1e-10 * scale {
                        return Err(Error::InvalidArgument(format!(
                            "component {g} covariance is not symmetric"
                        )));
                    }
                }
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "mixing weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { components })
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn dimension(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn into_components(self) -> Vec<MixtureComponent> {
        self.components
    }

    /// Reorders components so that slot `g` holds the old component
    /// `order[g]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        debug_assert_eq!(order.len(), self.components.len());
        Self {
            components: order.iter().map(|&g| self.components[g].clone()).collect(),
        }
    }

    pub fn weights(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.components.len(),
            self.components.iter().map(|c| c.weight),
        )
    }
}

/// Posterior membership matrix, `n x G`, rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    matrix: Matrix,
}

impl Responsibilities {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.ncols() == 0 {
            return Err(Error::Dimension(
                "responsibilities need at least one column".into(),
            ));
        }
        for (i, row) in matrix.row_iter().enumerate() {
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Data(format!(
                    "responsibility row {i} has invalid entries"
                )));
            }
            if (row.sum() - 1.0).abs() > 1e-8 {
                return Err(Error::Data(format!(
                    "responsibility row {i} does not sum to 1"
                )));
            }
        }
        Ok(Self { matrix })
    }

    /// One-hot rows from hard labels.
    pub fn from_labels(labels: &[usize], groups: usize) -> Result<Self> {
        let mut matrix = Matrix::zeros(labels.len(), groups);
        for (i, &l) in labels.iter().enumerate() {
            if l >= groups {
                return Err(Error::InvalidArgument(format!(
                    "label {l} at row {i} is out of range for {groups} groups"
                )));
            }
            matrix[(i, l)] = 1.0;
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: Matrix) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_components(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }

    /// Row-wise argmax; ties resolve to the lowest component index.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.matrix
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for (g, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = g;
                    }
                }
                best
            })
            .collect()
    }

    pub fn permute_columns(&self, order: &[usize]) -> Self {
        let mut matrix = Matrix::zeros(self.matrix.nrows(), order.len());
        for (g, &src) in order.iter().enumerate() {
            matrix.set_column(g, &self.matrix.column(src));
        }
        Self { matrix }
    }
}

/// Per-component quantities needed to evaluate log-densities.
struct CompiledComponent {
    log_weight: f64,
    mean: DVector<f64>,
    /// Inverse of the lower Cholesky factor.
    inv_factor: DMatrix<f64>,
    log_norm: f64,
}

/// Cholesky factor of `cov`, adding a growing ridge when the matrix is not
/// numerically positive definite.
pub fn factorize_covariance(cov: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(cov.clone()) {
        if chol
            .l_dirty()
            .diagonal()
            .iter()
            .all(|v| *v > 0.0 && v.is_finite())
        {
            return Ok(chol);
        }
    }
    let d = cov.nrows();
    let tr = cov.trace() / d as f64;
    let scale = if tr.is_finite() && tr > 0.0 { tr } else { 1.0 };
    let mut ridge = RIDGE_START * scale;
    while ridge <= RIDGE_LIMIT * scale * (1.0 + 1e-12) {
        let mut shifted = cov.clone();
        for i in 0..d {
            shifted[(i, i)] += ridge;
        }
        if let Some(chol) = Cholesky::new(shifted) {
            return Ok(chol);
        }
        ridge *= 10.0;
    }
    Err(Error::Numerical(
        "covariance is not positive definite after regularization".into(),
    ))
}

fn compile(model: &MixtureModel) -> Result<Vec<CompiledComponent>> {
    let d = model.dimension();
    model
        .components()
        .iter()
        .map(|c| {
            let chol = factorize_covariance(&c.covariance)?;
            let l = chol.l();
            let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let inv_factor = l
                .solve_lower_triangular(&DMatrix::identity(d, d))
                .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
            Ok(CompiledComponent {
                log_weight: c.weight.ln(),
                mean: c.mean.clone(),
                inv_factor,
                log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
            })
        })
        .collect()
}

/// `n x G` matrix of `log pi_g + log phi(x_i | mu_g, Sigma_g)`.
fn weighted_log_terms(model: &MixtureModel, data: &Matrix) -> Result<Matrix> {
    if data.ncols() != model.dimension() {
        return Err(Error::Dimension(format!(
            "data has {} columns, model has dimension {}",
            data.ncols(),
            model.dimension()
        )));
    }
    let compiled = compile(model)?;
    let n = data.nrows();
    let mut terms = Matrix::zeros(n, compiled.len());
    for (g, c) in compiled.iter().enumerate() {
        let mut centered = data.clone();
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            col.add_scalar_mut(-c.mean[j]);
        }
        let whitened = centered * c.inv_factor.transpose();
        for i in 0..n {
            let q = whitened.row(i).norm_squared();
            terms[(i, g)] = c.log_weight + c.log_norm - 0.5 * q;
        }
    }
    Ok(terms)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn log_density(model: &MixtureModel, x: &DVector<f64>) -> Result<f64> {
    let row = Matrix::from_row_slice(1, x.len(), x.as_slice());
    let terms = weighted_log_terms(model, &row)?;
    let row: Vec<f64> = terms.row(0).iter().copied().collect();
    Ok(log_sum_exp(&row))
}

/// Posterior memberships and the total log-likelihood of `data`.
pub fn e_step(model: &MixtureModel, data: &Matrix) -> Result<(Responsibilities, f64)> {
    let mut terms = weighted_log_terms(model, data)?;
    let mut loglik = 0.0;
    let mut buf = vec![0.0; terms.ncols()];
    for mut row in terms.row_iter_mut() {
        buf.iter_mut().zip(row.iter()).for_each(|(b, v)| *b = *v);
        let lse = log_sum_exp(&buf);
        if !lse.is_finite() {
            return Err(Error::Numerical("non-finite log-density in E-step".into()));
        }
        loglik += lse;
        row.apply(|v| *v = (*v - lse).exp());
    }
    Ok((Responsibilities::from_matrix_unchecked(terms), loglik))
}

pub fn log_likelihood(model: &MixtureModel, data: &Matrix) -> Result<f64> {
    e_step(model, data).map(|(_, ll)| ll)
}

/// Weighted maximum-likelihood update of weights, means and (biased)
/// covariances. No regularization is applied here.
pub fn m_step(data: &Matrix, resp: &Responsibilities) -> Result<MixtureModel> {
    let (n, d) = data.shape();
    if resp.nrows() != n {
        return Err(Error::Dimension(format!(
            "{} responsibility rows for {n} observations",
            resp.nrows()
        )));
    }
    let z = resp.matrix();
    let threshold = EMPTY_FRACTION * n as f64;
    let mut components = Vec::with_capacity(z.ncols());
    for g in 0..z.ncols() {
        let zg = z.column(g);
        let count = zg.sum();
        if count.is_nan() || count <= threshold {
            return Err(Error::EmptyComponent {
                component: g,
                count,
            });
        }
        let mean = data.tr_mul(&zg) / count;
        let mut centered = data.clone();
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mean[j]);
        }
        let mut weighted = centered.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= zg[i];
        }
        let mut cov = weighted.transpose() * &centered / count;
        for i in 0..d {
            for j in 0..i {
                let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = avg;
                cov[(j, i)] = avg;
            }
        }
        components.push(MixtureComponent {
            weight: count / n as f64,
            mean,
            covariance: cov,
        });
    }
    MixtureModel::new(components)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    #[default]
    Kmeans,
    Random,
}

/// Starting memberships for EM.
#[derive(Debug, Clone)]
pub enum InitStrategy {
    /// k-means (k-means++ seeding, at most 50 Lloyd iterations per start).
    KMeans {
        seed: u64,
        restarts: usize,
    },
    /// Discrete uniform random hard labels.
    Random {
        seed: u64,
    },
    Labels(Vec<usize>),
    Soft(Responsibilities),
}

impl InitStrategy {
    pub fn from_method(method: &InitMethod, seed: u64) -> Self {
        match method {
            InitMethod::Kmeans => InitStrategy::KMeans {
                seed,
                restarts: kmeans::DEFAULT_RESTARTS,
            },
            InitMethod::Random => InitStrategy::Random { seed },
        }
    }

    pub fn responsibilities(&self, data: &Matrix, groups: usize) -> Result<Responsibilities> {
        let n = data.nrows();
        match self {
            InitStrategy::KMeans { seed, restarts } => {
                let labels = kmeans::kmeans(data, groups, *seed, *restarts)?.labels;
                Responsibilities::from_labels(&labels, groups)
            }
            InitStrategy::Random { seed } => {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..groups)).collect();
                Responsibilities::from_labels(&labels, groups)
            }
            InitStrategy::Labels(labels) => {
                if labels.len() != n {
                    return Err(Error::Dimension(format!(
                        "{} initial labels for {n} observations",
                        labels.len()
                    )));
                }
                Responsibilities::from_labels(labels, groups)
            }
            InitStrategy::Soft(resp) => {
                if resp.nrows() != n || resp.num_components() != groups {
                    return Err(Error::Dimension(
                        "initial responsibilities have the wrong shape".into(),
                    ));
                }
                Ok(resp.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    /// Lack-of-progress threshold on successive log-likelihoods.
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            eps: 0.1,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: MixtureModel,
    pub responsibilities: Responsibilities,
    /// Log-likelihood after every E-step.
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl EmFit {
    pub fn log_likelihood(&self) -> f64 {
        *self.trace.last().expect("EM runs at least one iteration")
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Alternates M- and E-steps from the initial memberships until
/// `|l(k) - l(k-1)| < eps` or `max_iter` iterations.
pub fn fit_em(
    data: &Matrix,
    groups: usize,
    init: &InitStrategy,
    options: &EmOptions,
) -> Result<EmFit> {
    let n = data.nrows();
    if groups == 0 {
        return Err(Error::InvalidArgument(
            "number of groups must be positive".into(),
        ));
    }
    if n <= groups {
        return Err(Error::InvalidArgument(format!(
            "{n} observations are not enough for {groups} groups"
        )));
    }
    if options.eps.is_nan() || options.eps <= 0.0 || options.max_iter == 0 {
        return Err(Error::InvalidArgument(
            "EM needs eps > 0 and max_iter >= 1".into(),
        ));
    }
    let mut resp = init.responsibilities(data, groups)?;
    let mut trace: Vec<f64> = Vec::new();
    let mut model = None;
    let mut converged = false;
    for _ in 0..options.max_iter {
        let next = m_step(data, &resp)?;
        let (r, ll) = e_step(&next, data)?;
        resp = r;
        model = Some(next);
        if let Some(prev) = trace.last() {
            let done = (ll - prev).abs() < options.eps;
            trace.push(ll);
            if done {
                converged = true;
                break;
            }
        } else {
            trace.push(ll);
        }
    }
    Ok(EmFit {
        model: model.expect("max_iter >= 1"),
        responsibilities: resp,
        trace,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParameterFamily {
    /// Unconstrained Gaussian mixture.
    FullGmm,
    /// Mixture of factor analyzers with `q` latent factors (reporting only).
    FactorAnalyzer { q: usize },
}

pub fn count_free_parameters(groups: usize, p: usize, family: ParameterFamily) -> Result<usize> {
    if groups == 0 || p == 0 {
        return Err(Error::InvalidArgument(
            "groups and p must be positive".into(),
        ));
    }
    match family {
        ParameterFamily::FullGmm => Ok((groups - 1) + groups * p + groups * p * (p + 1) / 2),
        ParameterFamily::FactorAnalyzer { q } => {
            if q == 0 || q >= p {
                return Err(Error::InvalidArgument(format!(
                    "factor count q={q} must satisfy 1 <= q < p={p}"
                )));
            }
            Ok(groups * (p * q - q * (q - 1) / 2) + groups * p)
        }
    }
}

/// `2 l - rho log n`; larger is better.
pub fn bic(log_likelihood: f64, num_free_params: usize, n: usize) -> f64 {
    2.0 * log_likelihood - num_free_params as f64 * (n as f64).ln()
}
