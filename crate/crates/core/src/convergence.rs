//! Stopping rules: lack of progress (inside EM), a Durbin-Watson test on a
//! trailing log-likelihood window, and the scaled relative change of the
//! averaged parameters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{count_free_parameters, MixtureComponent, MixtureModel, ParameterFamily};

/// Denominator floor for relative differences.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    /// EM lack-of-progress threshold.
    pub eps: f64,
    /// Threshold on the scaled relative parameter change.
    pub eps_b: f64,
    /// Durbin-Watson significance level.
    pub dw_alpha: f64,
    /// Trailing window length for the Durbin-Watson test.
    pub dw_window: usize,
    /// No convergence check before this many accepted samples.
    pub min_bootstrap: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            eps: 0.1,
            eps_b: 0.001,
            dw_alpha: 0.05,
            dw_window: 500,
            min_bootstrap: 300,
        }
    }
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_nan() || self.eps <= 0.0 || self.eps_b.is_nan() || self.eps_b <= 0.0 {
            return Err(Error::InvalidArgument(
                "eps and eps_b must be positive".into(),
            ));
        }
        if !(self.dw_alpha > 0.0 && self.dw_alpha < 1.0) {
            return Err(Error::InvalidArgument("dw_alpha must lie in (0, 1)".into()));
        }
        if self.dw_window < 2 {
            return Err(Error::InvalidArgument(
                "dw_window must be at least 2".into(),
            ));
        }
        if self.min_bootstrap == 0 {
            return Err(Error::InvalidArgument(
                "min_bootstrap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Flat view of mixture parameters: weights, `G x d` means and one
/// covariance per component.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSnapshot {
    pub weights: DVector<f64>,
    pub means: DMatrix<f64>,
    pub covariances: Vec<DMatrix<f64>>,
}

impl ParamSnapshot {
    pub fn zeros(groups: usize, dim: usize) -> Self {
        Self {
            weights: DVector::zeros(groups),
            means: DMatrix::zeros(groups, dim),
            covariances: vec![DMatrix::zeros(dim, dim); groups],
        }
    }

    pub fn groups(&self) -> usize {
        self.weights.len()
    }

    pub fn dimension(&self) -> usize {
        self.means.ncols()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.weights.len() == other.weights.len()
            && self.means.shape() == other.means.shape()
            && self.covariances.len() == other.covariances.len()
            && self
                .covariances
                .iter()
                .zip(&other.covariances)
                .all(|(a, b)| a.shape() == b.shape())
    }

    /// Applies `f(self_value, other_value)` element-wise in place.
    pub fn zip_apply(&mut self, other: &Self, mut f: impl FnMut(&mut f64, f64)) {
        self.weights.zip_apply(&other.weights, &mut f);
        self.means.zip_apply(&other.means, &mut f);
        for (a, b) in self.covariances.iter_mut().zip(&other.covariances) {
            a.zip_apply(b, &mut f);
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            weights: self.weights.map(&mut f),
            means: self.means.map(&mut f),
            covariances: self.covariances.iter().map(|c| c.map(&mut f)).collect(),
        }
    }

    pub fn to_model(&self) -> Result<MixtureModel> {
        let components = (0..self.groups())
            .map(|g| MixtureComponent {
                weight: self.weights[g],
                mean: self.means.row(g).transpose(),
                covariance: self.covariances[g].clone(),
            })
            .collect();
        MixtureModel::new(components)
    }
}

impl From<&MixtureModel> for ParamSnapshot {
    fn from(model: &MixtureModel) -> Self {
        let (g, d) = (model.num_components(), model.dimension());
        let mut means = DMatrix::zeros(g, d);
        for (k, c) in model.components().iter().enumerate() {
            means.set_row(k, &c.mean.transpose());
        }
        Self {
            weights: model.weights(),
            means,
            covariances: model
                .components()
                .iter()
                .map(|c| c.covariance.clone())
                .collect(),
        }
    }
}

fn relative_term(prev: f64, curr: f64) -> f64 {
    (curr - prev).abs() / prev.abs().max(DENOMINATOR_FLOOR)
}

/// Sum of component-wise relative changes over weights, means and the
/// upper triangle (diagonal included) of every covariance.
pub fn relative_param_difference(prev: &ParamSnapshot, curr: &ParamSnapshot) -> Result<f64> {
    if !prev.same_shape(curr) {
        return Err(Error::Dimension(
            "parameter snapshots differ in shape".into(),
        ));
    }
    let mut total = 0.0;
    for (a, b) in prev.weights.iter().zip(curr.weights.iter()) {
        total += relative_term(*a, *b);
    }
    for (a, b) in prev.means.iter().zip(curr.means.iter()) {
        total += relative_term(*a, *b);
    }
    for (a, b) in prev.covariances.iter().zip(&curr.covariances) {
        let d = a.nrows();
        for j in 0..d {
            for k in j..d {
                total += relative_term(a[(j, k)], b[(j, k)]);
            }
        }
    }
    Ok(total)
}

/// `r_theta / [(G-1) + G d + G d (d+1)/2] < eps_b`, with `d` the dimension
/// the parameters live in.
pub fn check_param_convergence(
    r_theta: f64,
    groups: usize,
    dim: usize,
    config: &ConvergenceConfig,
) -> bool {
    let count = count_free_parameters(groups.max(1), dim.max(1), ParameterFamily::FullGmm)
        .expect("positive arguments") as f64;
    r_theta / count < config.eps_b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DurbinWatson {
    pub statistic: f64,
    /// Two-sided p-value from the normal approximation `N(2, 4/T)`.
    pub p_value: f64,
}

/// Durbin-Watson statistic of the residuals of `series` about its
/// least-squares linear trend in the index.
pub fn durbin_watson(series: &[f64]) -> Result<DurbinWatson> {
    let t = series.len();
    if t < 2 {
        return Err(Error::InvalidArgument(
            "durbin-watson needs at least two values".into(),
        ));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("series has non-finite values".into()));
    }
    let residuals = detrend(series);
    let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let denom: f64 = residuals.iter().map(|e| e * e).sum();
    if denom <= (1e-13 * scale).powi(2) * t as f64 {
        return Err(Error::UndefinedStatistic);
    }
    let numer: f64 = residuals.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    let statistic = numer / denom;
    let z = (statistic - 2.0) / (4.0 / t as f64).sqrt();
    let p_value = libm::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0);
    Ok(DurbinWatson { statistic, p_value })
}

fn detrend(series: &[f64]) -> Vec<f64> {
    let t = series.len() as f64;
    let x_mean = (t - 1.0) / 2.0;
    let y_mean = series.iter().sum::<f64>() / t;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in series.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    series
        .iter()
        .enumerate()
        .map(|(i, y)| y - y_mean - slope * (i as f64 - x_mean))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DwCheck {
    /// Not enough history to run the test.
    NotReady,
    Converged(Option<DurbinWatson>),
    NotConverged(DurbinWatson),
}

impl DwCheck {
    pub fn is_converged(&self) -> bool {
        matches!(self, DwCheck::Converged(_))
    }
}

/// Tests the trailing `dw_window` values for autocorrelation. Failing to
/// reject at `dw_alpha` counts as converged. A window with no residual
/// variation at all is also treated as converged.
pub fn check_dw_convergence(history: &[f64], config: &ConvergenceConfig) -> DwCheck {
    if history.len() < config.min_bootstrap.max(config.dw_window) {
        return DwCheck::NotReady;
    }
    let window = &history[history.len() - config.dw_window..];
    match durbin_watson(window) {
        Ok(dw) if dw.p_value >= config.dw_alpha => DwCheck::Converged(Some(dw)),
        Ok(dw) => DwCheck::NotConverged(dw),
        Err(_) => DwCheck::Converged(None),
    }
}
