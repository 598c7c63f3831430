//! Non-parametric bootstrap engine shared by the bootstrapped estimators.
//!
//! Each iteration draws `n` rows with replacement, fits EM on them starting
//! from the previous iteration's hard memberships, aligns the fitted
//! components to the running average, and folds the result into the
//! averaged parameters, the out-of-bag posteriors and the per-observation
//! membership averages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::convergence::{
    check_dw_convergence, check_param_convergence, relative_param_difference, ConvergenceConfig,
    DwCheck, ParamSnapshot,
};
use crate::error::{Error, Result};
use crate::gmm::{e_step, EmOptions, MixtureModel, Responsibilities};
use crate::Matrix;

/// Exhaustive permutation search is used up to this many components.
pub const EXHAUSTIVE_ALIGNMENT_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapSample {
    pub indices: Vec<usize>,
    pub in_bag_mask: Vec<bool>,
}

impl BootstrapSample {
    pub fn from_indices(n: usize, indices: Vec<usize>) -> Self {
        let mut in_bag_mask = vec![false; n];
        for &i in &indices {
            in_bag_mask[i] = true;
        }
        Self {
            indices,
            in_bag_mask,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn out_of_bag(&self) -> impl Iterator<Item = usize> + '_ {
        self.in_bag_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &inside)| (!inside).then_some(i))
    }

    /// In-bag rows of `data`, duplicates included, in draw order.
    pub fn gather(&self, data: &Matrix) -> Matrix {
        data.select_rows(self.indices.iter())
    }

    pub fn gather_labels(&self, labels: &[usize]) -> Vec<usize> {
        self.indices.iter().map(|&i| labels[i]).collect()
    }
}

/// `n` uniform draws with replacement from `0..n`.
pub fn draw_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BootstrapSample {
    let indices = (0..n).map(|_| rng.random_range(0..n)).collect();
    BootstrapSample::from_indices(n, indices)
}

fn mean_distance(
    reference: &ParamSnapshot,
    slot: usize,
    candidate: &MixtureModel,
    g: usize,
) -> f64 {
    reference
        .means
        .row(slot)
        .iter()
        .zip(candidate.components()[g].mean.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Permutation `order` such that `candidate.permuted(&order)` puts in slot
/// `g` the candidate component whose mean is closest to reference mean `g`,
/// minimising the total squared distance. Ties keep the earliest
/// permutation in lexicographic order, so an exact match returns the
/// identity.
pub fn alignment_permutation(reference: &ParamSnapshot, candidate: &MixtureModel) -> Vec<usize> {
    let g = candidate.num_components();
    let cost: Vec<Vec<f64>> = (0..g)
        .map(|slot| {
            (0..g)
                .map(|c| mean_distance(reference, slot, candidate, c))
                .collect()
        })
        .collect();
    if g <= EXHAUSTIVE_ALIGNMENT_LIMIT {
        let mut perm: Vec<usize> = (0..g).collect();
        let mut best = perm.clone();
        let mut best_cost = f64::INFINITY;
        loop {
            let c: f64 = perm
                .iter()
                .enumerate()
                .map(|(slot, &k)| cost[slot][k])
                .sum();
            if c < best_cost {
                best_cost = c;
                best.clone_from(&perm);
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        best
    } else {
        let mut order = vec![usize::MAX; g];
        let mut used = vec![false; g];
        for _ in 0..g {
            let mut pick = (usize::MAX, usize::MAX, f64::INFINITY);
            for slot in (0..g).filter(|&s| order[s] == usize::MAX) {
                for c in (0..g).filter(|&c| !used[c]) {
                    if cost[slot][c] < pick.2 {
                        pick = (slot, c, cost[slot][c]);
                    }
                }
            }
            order[pick.0] = pick.1;
            used[pick.1] = true;
        }
        order
    }
}

pub(crate) fn next_permutation(perm: &mut [usize]) -> bool {
    if perm.len() < 2 {
        return false;
    }
    let mut i = perm.len() - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = perm.len() - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

pub fn align_components(reference: &ParamSnapshot, candidate: MixtureModel) -> MixtureModel {
    let order = alignment_permutation(reference, &candidate);
    if order.iter().enumerate().all(|(a, &b)| a == b) {
        candidate
    } else {
        candidate.permuted(&order)
    }
}

/// Running state of a bootstrap run.
#[derive(Debug, Clone)]
pub struct BootstrapState {
    /// Number of accepted samples so far.
    pub iteration: usize,
    averaged: Option<ParamSnapshot>,
    /// Welford sums of squared deviations, same layout as `averaged`.
    sum_sq: Option<ParamSnapshot>,
    /// Full-data log-likelihood under the averaged parameters.
    pub loglik_history: Vec<f64>,
    /// Full-data log-likelihood under each sample's own estimate.
    pub sample_loglik_history: Vec<f64>,
    oob_sum: Matrix,
    oob_count: Vec<usize>,
    membership_sum: Matrix,
    membership_updates: usize,
}

impl BootstrapState {
    pub fn new(n: usize, groups: usize) -> Self {
        Self {
            iteration: 0,
            averaged: None,
            sum_sq: None,
            loglik_history: Vec::new(),
            sample_loglik_history: Vec::new(),
            oob_sum: Matrix::zeros(n, groups),
            oob_count: vec![0; n],
            membership_sum: Matrix::zeros(n, groups),
            membership_updates: 0,
        }
    }

    pub fn averaged(&self) -> Option<&ParamSnapshot> {
        self.averaged.as_ref()
    }

    pub fn averaged_model(&self) -> Result<MixtureModel> {
        self.averaged
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("no bootstrap sample accepted yet".into()))?
            .to_model()
    }

    /// Folds a new (already aligned) estimate into the running mean.
    pub fn update_average(&mut self, model: &MixtureModel) -> Result<()> {
        let x = ParamSnapshot::from(model);
        self.iteration += 1;
        match (&mut self.averaged, &mut self.sum_sq) {
            (Some(avg), Some(m2)) => {
                if !avg.same_shape(&x) {
                    return Err(Error::Dimension(
                        "estimate does not match averaged shape".into(),
                    ));
                }
                let k = self.iteration as f64;
                let before = avg.clone();
                avg.zip_apply(&x, |a, v| *a += (v - *a) / k);
                // m2 += (x - mean_old) * (x - mean_new)
                let mut delta_old = x.clone();
                delta_old.zip_apply(&before, |v, b| *v -= b);
                let mut delta_new = x;
                delta_new.zip_apply(avg, |v, a| *v -= a);
                delta_old.zip_apply(&delta_new, |a, b| *a *= b);
                m2.zip_apply(&delta_old, |s, v| *s += v);
            }
            _ => {
                self.sum_sq = Some(x.map(|_| 0.0));
                self.averaged = Some(x);
            }
        }
        Ok(())
    }

    /// E-step of the out-of-bag rows of `full_data` under `model`.
    pub fn accumulate_oob(
        &mut self,
        sample: &BootstrapSample,
        model: &MixtureModel,
        full_data: &Matrix,
    ) -> Result<()> {
        let oob: Vec<usize> = sample.out_of_bag().collect();
        if oob.is_empty() {
            return Ok(());
        }
        let rows = full_data.select_rows(oob.iter());
        let (resp, _) = e_step(model, &rows)?;
        for (r, &i) in oob.iter().enumerate() {
            let mut target = self.oob_sum.row_mut(i);
            target += resp.matrix().row(r);
            self.oob_count[i] += 1;
        }
        Ok(())
    }

    /// Same as [`accumulate_oob`](Self::accumulate_oob) when the full-data
    /// posteriors are already known.
    pub fn accumulate_oob_rows(&mut self, sample: &BootstrapSample, full_resp: &Responsibilities) {
        for i in sample.out_of_bag() {
            let mut target = self.oob_sum.row_mut(i);
            target += full_resp.matrix().row(i);
            self.oob_count[i] += 1;
        }
    }

    pub fn accumulate_memberships(&mut self, full_resp: &Responsibilities) {
        self.membership_sum += full_resp.matrix();
        self.membership_updates += 1;
    }

    pub fn oob_counts(&self) -> &[usize] {
        &self.oob_count
    }

    /// Observations that were never out of bag.
    pub fn unobserved_oob(&self) -> Vec<usize> {
        (0..self.oob_count.len())
            .filter(|&i| self.oob_count[i] == 0)
            .collect()
    }

    /// Mean out-of-bag posterior per observation. Rows that were never out
    /// of bag are uniform; see [`unobserved_oob`](Self::unobserved_oob).
    pub fn oob_memberships(&self) -> Responsibilities {
        let groups = self.oob_sum.ncols();
        let mut m = self.oob_sum.clone();
        for (i, mut row) in m.row_iter_mut().enumerate() {
            if self.oob_count[i] == 0 {
                row.fill(1.0 / groups as f64);
            } else {
                row /= self.oob_count[i] as f64;
            }
        }
        Responsibilities::from_matrix_unchecked(m)
    }

    /// Full-data memberships averaged over accepted samples.
    pub fn averaged_memberships(&self) -> Option<Responsibilities> {
        (self.membership_updates > 0).then(|| {
            Responsibilities::from_matrix_unchecked(
                &self.membership_sum / self.membership_updates as f64,
            )
        })
    }

    /// Element-wise bootstrap standard deviation with `k - 1` in the
    /// denominator.
    pub fn std_errors(&self) -> Result<ParamSnapshot> {
        if self.iteration < 2 {
            return Err(Error::InvalidArgument(
                "standard errors need at least two bootstrap samples".into(),
            ));
        }
        let denom = (self.iteration - 1) as f64;
        Ok(self
            .sum_sq
            .as_ref()
            .expect("present once iteration >= 1")
            .map(|s| (s.max(0.0) / denom).sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoppingRule {
    DurbinWatson,
    ParameterChange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub em: EmOptions,
    pub convergence: ConvergenceConfig,
    pub rule: StoppingRule,
    pub max_bootstrap: usize,
    /// Consecutive failed samples tolerated before giving up.
    pub max_redraws: usize,
    pub seed: u64,
}

/// Result of fitting one bootstrap sample.
pub struct SampleFit {
    pub model: MixtureModel,
    /// Full data in the sample's own embedding; `None` means the run's
    /// reference data.
    pub full_data: Option<Matrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub log_likelihood: f64,
    pub sample_log_likelihood: f64,
    pub r_theta: Option<f64>,
    pub dw_statistic: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct BootstrapOutcome {
    pub state: BootstrapState,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    /// Samples thrown away because their fit failed.
    pub discarded: usize,
    pub averaged_model: MixtureModel,
}

fn is_recoverable(err: &Error) -> bool {
    matches!(err, Error::EmptyComponent { .. } | Error::Numerical(_))
}

/// Runs the bootstrap loop. `reference` is the full data in the space where
/// the averaged parameters are evaluated; `fit_sample` fits one sample given
/// the warm-start labels of the full data.
pub fn run_bootstrap<F>(
    reference: &Matrix,
    initial_labels: Vec<usize>,
    groups: usize,
    options: &BootstrapOptions,
    mut fit_sample: F,
) -> Result<BootstrapOutcome>
where
    F: FnMut(&BootstrapSample, &[usize]) -> Result<SampleFit>,
{
    options.convergence.validate()?;
    if options.max_bootstrap < options.convergence.min_bootstrap {
        return Err(Error::InvalidArgument(format!(
            "max_bootstrap {} is below min_bootstrap {}",
            options.max_bootstrap, options.convergence.min_bootstrap
        )));
    }
    let n = reference.nrows();
    if initial_labels.len() != n {
        return Err(Error::Dimension(
            "initial labels do not match the data".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut labels = initial_labels;
    let mut state = BootstrapState::new(n, groups);
    let mut trace = Vec::new();
    let mut discarded = 0;
    let mut converged = false;

    while state.iteration < options.max_bootstrap {
        let mut failures = 0;
        let (sample, model, resp, sample_ll) = loop {
            let sample = draw_sample(n, &mut rng);
            let attempt = fit_sample(&sample, &labels).and_then(|fit| {
                let model = match state.averaged() {
                    Some(avg) => align_components(avg, fit.model),
                    None => fit.model,
                };
                let full = fit.full_data.as_ref().unwrap_or(reference);
                let (resp, ll) = e_step(&model, full)?;
                Ok((model, resp, ll))
            });
            match attempt {
                Ok((model, resp, ll)) => break (sample, model, resp, ll),
                Err(e) if is_recoverable(&e) => {
                    failures += 1;
                    discarded += 1;
                    log::debug!("discarding bootstrap sample: {e}");
                    if failures > options.max_redraws {
                        return Err(Error::BootstrapAborted {
                            iteration: state.iteration + 1,
                            reason: format!(
                                "{} consecutive samples failed, last error: {e}",
                                failures
                            ),
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        };

        let previous = state.averaged().cloned();
        state.update_average(&model)?;
        state.accumulate_oob_rows(&sample, &resp);
        state.accumulate_memberships(&resp);
        labels = resp.hard_labels();

        let loglik = e_step(&state.averaged_model()?, reference)?.1;
        state.loglik_history.push(loglik);
        state.sample_loglik_history.push(sample_ll);

        let averaged = state.averaged().expect("just updated");
        let r_theta = previous
            .map(|p| relative_param_difference(&p, averaged))
            .transpose()?;
        let mut dw_statistic = None;
        if state.iteration >= options.convergence.min_bootstrap {
            converged = match options.rule {
                StoppingRule::ParameterChange => r_theta.is_some_and(|r| {
                    check_param_convergence(r, groups, averaged.dimension(), &options.convergence)
                }),
                StoppingRule::DurbinWatson => {
                    let check =
                        check_dw_convergence(&state.sample_loglik_history, &options.convergence);
                    dw_statistic = match check {
                        DwCheck::Converged(Some(dw)) | DwCheck::NotConverged(dw) => {
                            Some(dw.statistic)
                        }
                        _ => None,
                    };
                    check.is_converged()
                }
            };
        }
        trace.push(TraceRecord {
            iteration: state.iteration,
            log_likelihood: loglik,
            sample_log_likelihood: sample_ll,
            r_theta,
            dw_statistic,
            converged,
        });
        if converged {
            break;
        }
    }

    let averaged_model = state.averaged_model()?;
    Ok(BootstrapOutcome {
        state,
        trace,
        converged,
        discarded,
        averaged_model,
    })
}
