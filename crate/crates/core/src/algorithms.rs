//! The five estimators and their shared configuration and result types.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{run_bootstrap, BootstrapOptions, SampleFit, StoppingRule, TraceRecord};
use crate::convergence::{ConvergenceConfig, ParamSnapshot};
use crate::error::{Error, Result};
use crate::gmm::{
    bic, count_free_parameters, e_step, fit_em, EmOptions, InitMethod, InitStrategy, MixtureModel,
    ParameterFamily, Responsibilities,
};
use crate::spectral::{spectral_transform_with, SpectralOptions};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Em,
    SpectralEm,
    BootEm,
    SpectralBootEm,
    BootSpectral,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Em,
        Algorithm::SpectralEm,
        Algorithm::BootEm,
        Algorithm::SpectralBootEm,
        Algorithm::BootSpectral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Em => "em",
            Algorithm::SpectralEm => "spectral-em",
            Algorithm::BootEm => "boot-em",
            Algorithm::SpectralBootEm => "spectral-boot-em",
            Algorithm::BootSpectral => "boot-spectral",
        }
    }

    pub fn is_bootstrapped(self) -> bool {
        matches!(
            self,
            Algorithm::BootEm | Algorithm::SpectralBootEm | Algorithm::BootSpectral
        )
    }

    pub fn is_spectral(self) -> bool {
        matches!(
            self,
            Algorithm::SpectralEm | Algorithm::SpectralBootEm | Algorithm::BootSpectral
        )
    }

    /// 500 samples for the Durbin-Watson variant, 300 for the spectral ones.
    pub fn default_min_bootstrap(self) -> usize {
        match self {
            Algorithm::BootEm => 500,
            _ => 300,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm '{s}'")))
    }
}

/// How bootstrapped estimators report final full-data memberships.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MembershipSummary {
    /// Mean of the per-sample full-data memberships.
    #[default]
    IterationAverage,
    /// Posterior of the full data under the averaged parameters.
    AveragedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    #[serde(alias = "G")]
    pub groups: usize,
    pub eps: f64,
    pub eps_b: f64,
    pub dw_alpha: f64,
    pub dw_window: usize,
    /// Defaults per algorithm when unset.
    pub min_bootstrap: Option<usize>,
    pub max_bootstrap: usize,
    pub seed: u64,
    pub init: InitMethod,
    pub max_em_iter: usize,
    pub max_redraws: usize,
    pub center: bool,
    pub membership: MembershipSummary,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::SpectralBootEm,
            groups: 2,
            eps: 0.1,
            eps_b: 0.001,
            dw_alpha: 0.05,
            dw_window: 500,
            min_bootstrap: None,
            max_bootstrap: 10_000,
            seed: 0,
            init: InitMethod::Kmeans,
            max_em_iter: 1000,
            max_redraws: 20,
            center: false,
            membership: MembershipSummary::IterationAverage,
        }
    }
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, groups: usize) -> Self {
        Self {
            algorithm,
            groups,
            ..Self::default()
        }
    }

    pub fn min_bootstrap(&self) -> usize {
        self.min_bootstrap
            .unwrap_or_else(|| self.algorithm.default_min_bootstrap())
    }

    pub fn convergence(&self) -> ConvergenceConfig {
        ConvergenceConfig {
            eps: self.eps,
            eps_b: self.eps_b,
            dw_alpha: self.dw_alpha,
            dw_window: self.dw_window,
            min_bootstrap: self.min_bootstrap(),
        }
    }

    pub fn em_options(&self) -> EmOptions {
        EmOptions {
            eps: self.eps,
            max_iter: self.max_em_iter,
        }
    }

    fn spectral_options(&self) -> SpectralOptions {
        SpectralOptions {
            center: self.center,
            ..SpectralOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 {
            return Err(Error::InvalidArgument("groups must be at least 1".into()));
        }
        if self.max_em_iter == 0 {
            return Err(Error::InvalidArgument(
                "max_em_iter must be at least 1".into(),
            ));
        }
        self.convergence().validate()?;
        if self.algorithm.is_bootstrapped() && self.max_bootstrap < self.min_bootstrap() {
            return Err(Error::InvalidArgument(format!(
                "max_bootstrap {} is below min_bootstrap {}",
                self.max_bootstrap,
                self.min_bootstrap()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimationSpace {
    Original,
    Spectral { rank: usize },
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub algorithm: Algorithm,
    /// Parameters in the estimation space (the averaged parameters for
    /// bootstrapped estimators).
    pub model: MixtureModel,
    pub memberships: Responsibilities,
    pub oob_memberships: Option<Responsibilities>,
    /// Observations never left out of bag.
    pub oob_unobserved: Vec<usize>,
    pub log_likelihood: f64,
    pub bootstrap_iterations: Option<usize>,
    pub converged: bool,
    pub elapsed_seconds: f64,
    pub trace: Vec<TraceRecord>,
    pub estimation_space: EstimationSpace,
    pub std_errors: Option<ParamSnapshot>,
    pub svd_count: usize,
    pub discarded_samples: usize,
    pub observations: usize,
}

impl FitResult {
    pub fn free_parameters(&self) -> usize {
        count_free_parameters(
            self.model.num_components(),
            self.model.dimension(),
            ParameterFamily::FullGmm,
        )
        .expect("fitted model has positive dimensions")
    }

    pub fn bic(&self) -> f64 {
        bic(
            self.log_likelihood,
            self.free_parameters(),
            self.observations,
        )
    }

    /// Orders two results by BIC. Results estimated in different spaces are
    /// not comparable.
    pub fn compare_bic(&self, other: &FitResult) -> Result<Ordering> {
        if self.estimation_space != other.estimation_space {
            return Err(Error::InvalidArgument(format!(
                "cannot compare BIC across estimation spaces ({:?} vs {:?})",
                self.estimation_space, other.estimation_space
            )));
        }
        Ok(self.bic().total_cmp(&other.bic()))
    }

    pub fn hard_labels(&self) -> Vec<usize> {
        self.memberships.hard_labels()
    }
}

fn check_data(data: &Matrix, config: &RunConfig) -> Result<()> {
    config.validate()?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("data matrix has non-finite entries".into()));
    }
    if data.nrows() <= config.groups {
        return Err(Error::InvalidArgument(format!(
            "{} observations are not enough for {} groups",
            data.nrows(),
            config.groups
        )));
    }
    Ok(())
}

/// Runs the estimator selected in `config`.
pub fn fit(data: &Matrix, config: &RunConfig) -> Result<FitResult> {
    match config.algorithm {
        Algorithm::Em => run_em(data, config),
        Algorithm::SpectralEm => run_spectral_em(data, config),
        Algorithm::BootEm => run_boot_em(data, config),
        Algorithm::SpectralBootEm => run_spectral_boot_em(data, config),
        Algorithm::BootSpectral => run_boot_spectral(data, config),
    }
}

fn em_result(
    config: &RunConfig,
    data: &Matrix,
    space: EstimationSpace,
    svd_count: usize,
    started: Instant,
) -> Result<FitResult> {
    let init = InitStrategy::from_method(&config.init, config.seed);
    let em = fit_em(data, config.groups, &init, &config.em_options())?;
    let last = em.trace.len();
    let trace = em
        .trace
        .iter()
        .enumerate()
        .map(|(i, &ll)| TraceRecord {
            iteration: i + 1,
            log_likelihood: ll,
            sample_log_likelihood: ll,
            r_theta: None,
            dw_statistic: None,
            converged: em.converged && i + 1 == last,
        })
        .collect();
    Ok(FitResult {
        algorithm: config.algorithm,
        log_likelihood: em.log_likelihood(),
        converged: em.converged,
        model: em.model,
        memberships: em.responsibilities,
        oob_memberships: None,
        oob_unobserved: Vec::new(),
        bootstrap_iterations: None,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        trace,
        estimation_space: space,
        std_errors: None,
        svd_count,
        discarded_samples: 0,
        observations: data.nrows(),
    })
}

/// EM on the raw data.
pub fn run_em(data: &Matrix, config: &RunConfig) -> Result<FitResult> {
    check_data(data, config)?;
    let started = Instant::now();
    em_result(config, data, EstimationSpace::Original, 0, started)
}

/// EM on the rank-G spectral embedding.
pub fn run_spectral_em(data: &Matrix, config: &RunConfig) -> Result<FitResult> {
    check_data(data, config)?;
    let started = Instant::now();
    let embedding = spectral_transform_with(data, config.groups, &config.spectral_options())?;
    em_result(
        config,
        &embedding.embedded,
        EstimationSpace::Spectral {
            rank: config.groups,
        },
        1,
        started,
    )
}

fn initial_labels(data: &Matrix, config: &RunConfig) -> Result<Vec<usize>> {
    Ok(InitStrategy::from_method(&config.init, config.seed)
        .responsibilities(data, config.groups)?
        .hard_labels())
}

fn bootstrap_options(config: &RunConfig, rule: StoppingRule) -> BootstrapOptions {
    BootstrapOptions {
        em: config.em_options(),
        convergence: config.convergence(),
        rule,
        max_bootstrap: config.max_bootstrap,
        max_redraws: config.max_redraws,
        // keep the resampling stream apart from the initialisation stream
        seed: config.seed ^ 0x9E37_79B9_7F4A_7C15,
    }
}

fn fit_on_sample(rows: &Matrix, labels: Vec<usize>, config: &RunConfig) -> Result<MixtureModel> {
    Ok(fit_em(
        rows,
        config.groups,
        &InitStrategy::Labels(labels),
        &config.em_options(),
    )?
    .model)
}

#[allow(clippy::too_many_arguments)]
fn bootstrap_result(
    config: &RunConfig,
    reference: &Matrix,
    initial: Vec<usize>,
    rule: StoppingRule,
    space: EstimationSpace,
    mut svd_count: usize,
    started: Instant,
    mut fitter: impl FnMut(
        &crate::bootstrap::BootstrapSample,
        &[usize],
        &mut usize,
    ) -> Result<SampleFit>,
) -> Result<FitResult> {
    let options = bootstrap_options(config, rule);
    let outcome = run_bootstrap(reference, initial, config.groups, &options, |s, l| {
        fitter(s, l, &mut svd_count)
    })?;
    let (averaged_posterior, _) = e_step(&outcome.averaged_model, reference)?;
    let memberships = match config.membership {
        MembershipSummary::IterationAverage => outcome
            .state
            .averaged_memberships()
            .expect("at least one accepted sample"),
        MembershipSummary::AveragedModel => averaged_posterior,
    };
    let log_likelihood = *outcome.state.loglik_history.last().expect("non-empty");
    Ok(FitResult {
        algorithm: config.algorithm,
        model: outcome.averaged_model,
        memberships,
        oob_memberships: Some(outcome.state.oob_memberships()),
        oob_unobserved: outcome.state.unobserved_oob(),
        log_likelihood,
        bootstrap_iterations: Some(outcome.state.iteration),
        converged: outcome.converged,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        trace: outcome.trace,
        estimation_space: space,
        std_errors: outcome.state.std_errors().ok(),
        svd_count,
        discarded_samples: outcome.discarded,
        observations: reference.nrows(),
    })
}

/// Bootstrap-averaged EM on the raw data, stopped by the Durbin-Watson
/// test.
pub fn run_boot_em(data: &Matrix, config: &RunConfig) -> Result<FitResult> {
    check_data(data, config)?;
    let started = Instant::now();
    let initial = initial_labels(data, config)?;
    bootstrap_result(
        config,
        data,
        initial,
        StoppingRule::DurbinWatson,
        EstimationSpace::Original,
        0,
        started,
        |sample, warm, _| {
            let model = fit_on_sample(&sample.gather(data), sample.gather_labels(warm), config)?;
            Ok(SampleFit {
                model,
                full_data: None,
            })
        },
    )
}

/// One SVD of the full data, then bootstrap over the embedded rows.
pub fn run_spectral_boot_em(data: &Matrix, config: &RunConfig) -> Result<FitResult> {
    check_data(data, config)?;
    let started = Instant::now();
    let embedding = spectral_transform_with(data, config.groups, &config.spectral_options())?;
    let embedded = embedding.embedded;
    let initial = initial_labels(&embedded, config)?;
    bootstrap_result(
        config,
        &embedded,
        initial,
        StoppingRule::ParameterChange,
        EstimationSpace::Spectral {
            rank: config.groups,
        },
        1,
        started,
        |sample, warm, _| {
            let model = fit_on_sample(
                &sample.gather(&embedded),
                sample.gather_labels(warm),
                config,
            )?;
            Ok(SampleFit {
                model,
                full_data: None,
            })
        },
    )
}

/// Fresh SVD of every bootstrap sample of raw rows. Full-data memberships
/// of each iteration use that sample's basis; the averaged parameters are
/// evaluated in the initial full-data embedding.
pub fn run_boot_spectral(data: &Matrix, config: &RunConfig) -> Result<FitResult> {
    check_data(data, config)?;
    let started = Instant::now();
    let options = config.spectral_options();
    let embedding = spectral_transform_with(data, config.groups, &options)?;
    let embedded = embedding.embedded;
    let initial = initial_labels(&embedded, config)?;
    bootstrap_result(
        config,
        &embedded,
        initial,
        StoppingRule::ParameterChange,
        EstimationSpace::Spectral {
            rank: config.groups,
        },
        1,
        started,
        |sample, warm, svd_count| {
            let rows = sample.gather(data);
            let local = spectral_transform_with(&rows, config.groups, &options)?;
            *svd_count += 1;
            let full = local.project(data)?;
            let model = fit_on_sample(&local.embedded, sample.gather_labels(warm), config)?;
            Ok(SampleFit {
                model,
                full_data: Some(full),
            })
        },
    )
}
