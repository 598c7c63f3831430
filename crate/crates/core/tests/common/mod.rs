//! Brute-force reference implementations shared by the test targets.
//!
//! Each oracle takes a deliberately different route from the library:
//! densities through an explicit inverse and determinant in linear space,
//! parameter updates through scalar loops, the SVD through one-sided
//! Jacobi rotations, the ARI through enumeration of all pairs.

#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use specboot::convergence::{durbin_watson, relative_param_difference, ParamSnapshot};
use specboot::gmm::{
    bic, count_free_parameters, e_step, m_step, MixtureComponent, MixtureModel, ParameterFamily,
    Responsibilities,
};
use specboot::metrics::adjusted_rand_index;
use specboot::{spectral_transform, Matrix};

pub const REL_TOL: f64 = 1e-8;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut impl Rng, n: usize, p: usize) -> Matrix {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_spd(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let a = normal_matrix(rng, d, d);
    &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.5
}

pub fn random_model(rng: &mut impl Rng, groups: usize, d: usize) -> MixtureModel {
    let raw: Vec<f64> = (0..groups).map(|_| rng.random_range(0.5..2.0)).collect();
    let total: f64 = raw.iter().sum();
    let components = raw
        .iter()
        .map(|w| MixtureComponent {
            weight: w / total,
            mean: DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)),
            covariance: random_spd(rng, d),
        })
        .collect();
    MixtureModel::new(components).expect("valid random model")
}

pub fn random_responsibilities(rng: &mut impl Rng, n: usize, groups: usize) -> Responsibilities {
    let mut m = DMatrix::from_fn(n, groups, |_, _| rng.random_range(0.05..1.0));
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    Responsibilities::new(m).expect("rows normalised")
}

/// `|a - b| <= tol * max(|a|, |b|)`, with an absolute floor for exact zeros.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn gaussian_pdf(x: &[f64], mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let d = mean.len();
    let inv = cov.clone().try_inverse().expect("invertible covariance");
    let det = cov.determinant();
    let mut q = 0.0;
    for j in 0..d {
        for k in 0..d {
            q += (x[j] - mean[j]) * inv[(j, k)] * (x[k] - mean[k]);
        }
    }
    (-0.5 * q).exp() / ((2.0 * PI).powi(d as i32) * det).sqrt()
}

/// Posterior responsibilities and log-likelihood evaluated element by
/// element in linear space.
pub fn oracle_e_step(model: &MixtureModel, data: &Matrix) -> (Vec<Vec<f64>>, f64) {
    let mut z = Vec::new();
    let mut ll = 0.0;
    for i in 0..data.nrows() {
        let x: Vec<f64> = data.row(i).iter().copied().collect();
        let joint: Vec<f64> = model
            .components()
            .iter()
            .map(|c| c.weight * gaussian_pdf(&x, &c.mean, &c.covariance))
            .collect();
        let total: f64 = joint.iter().sum();
        ll += total.ln();
        z.push(joint.iter().map(|j| j / total).collect());
    }
    (z, ll)
}

/// Weighted proportions, means and (biased) covariances with scalar loops.
pub fn oracle_m_step(data: &Matrix, z: &Matrix) -> Vec<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let (n, p) = data.shape();
    (0..z.ncols())
        .map(|g| {
            let ng: f64 = (0..n).map(|i| z[(i, g)]).sum();
            let mean: Vec<f64> = (0..p)
                .map(|j| (0..n).map(|i| z[(i, g)] * data[(i, j)]).sum::<f64>() / ng)
                .collect();
            let cov = (0..p)
                .map(|j| {
                    (0..p)
                        .map(|k| {
                            (0..n)
                                .map(|i| {
                                    z[(i, g)] * (data[(i, j)] - mean[j]) * (data[(i, k)] - mean[k])
                                })
                                .sum::<f64>()
                                / ng
                        })
                        .collect()
                })
                .collect();
            (ng / n as f64, mean, cov)
        })
        .collect()
}

pub fn oracle_r_theta(prev: &ParamSnapshot, curr: &ParamSnapshot) -> f64 {
    let term = |a: f64, b: f64| (b - a).abs() / a.abs().max(1e-12);
    let g = prev.weights.len();
    let d = prev.means.ncols();
    let mut r = 0.0;
    for k in 0..g {
        r += term(prev.weights[k], curr.weights[k]);
        for j in 0..d {
            r += term(prev.means[(k, j)], curr.means[(k, j)]);
        }
        for j in 0..d {
            for l in j..d {
                r += term(prev.covariances[k][(j, l)], curr.covariances[k][(j, l)]);
            }
        }
    }
    r
}

/// Durbin-Watson statistic after an OLS fit of `y = a + b t`, `t = 1..T`,
/// solved from the 2x2 normal equations.
pub fn oracle_durbin_watson(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let (mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let t = (i + 1) as f64;
        st += t;
        stt += t * t;
        sy += v;
        sty += t * v;
    }
    let det = n * stt - st * st;
    let a = (stt * sy - st * sty) / det;
    let b = (n * sty - st * sy) / det;
    let e: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, v)| v - a - b * (i + 1) as f64)
        .collect();
    let num: f64 = (1..e.len()).map(|t| (e[t] - e[t - 1]).powi(2)).sum();
    let den: f64 = e.iter().map(|v| v * v).sum();
    num / den
}

/// Counts free parameters by enumerating every parameter slot.
pub fn oracle_free_parameters(groups: usize, p: usize) -> usize {
    let mut count = groups - 1;
    for _ in 0..groups {
        count += p;
        for j in 0..p {
            for _ in j..p {
                count += 1;
            }
        }
    }
    count
}

/// Hubert-Arabie ARI from the four pair-agreement counts.
pub fn oracle_ari(a: &[usize], b: &[usize]) -> f64 {
    let (mut ss, mut sd, mut ds, mut dd) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => ss += 1.0,
                (true, false) => sd += 1.0,
                (false, true) => ds += 1.0,
                (false, false) => dd += 1.0,
            }
        }
    }
    let denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    if denom == 0.0 {
        1.0
    } else {
        2.0 * (ss * dd - sd * ds) / denom
    }
}

/// One-sided Jacobi SVD of a tall matrix: returns singular values
/// (descending) with the matching right singular vectors as columns, and
/// the rotated columns `A V` (column norms are the singular values).
fn jacobi_tall(a: &Matrix) -> (Vec<f64>, Matrix, Matrix) {
    let p = a.ncols();
    let mut u = a.clone();
    let mut v = DMatrix::identity(p, p);
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = u.column(i).norm_squared();
                let beta = u.column(j).norm_squared();
                let gamma = u.column(i).dot(&u.column(j));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut u, &mut v] {
                    for k in 0..m.nrows() {
                        let (x, y) = (m[(k, i)], m[(k, j)]);
                        m[(k, i)] = c * x - s * y;
                        m[(k, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..p).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));
    let sorted = order.iter().map(|&k| sigma[k]).collect();
    let v_sorted = DMatrix::from_fn(p, p, |r, c| v[(r, order[c])]);
    let u_sorted = DMatrix::from_fn(a.nrows(), p, |r, c| u[(r, order[c])]);
    (sorted, v_sorted, u_sorted)
}

/// All singular values of `x` and its top-`g` right singular vectors.
pub fn oracle_svd(x: &Matrix, g: usize) -> (Vec<f64>, Matrix) {
    if x.nrows() >= x.ncols() {
        let (s, v, _) = jacobi_tall(x);
        (s, v.columns(0, g).into_owned())
    } else {
        // right singular vectors of x are the left ones of x'
        let (s, _, u) = jacobi_tall(&x.transpose());
        let mut v = u.columns(0, g).into_owned();
        for (k, mut col) in v.column_iter_mut().enumerate() {
            col /= s[k];
        }
        (s, v)
    }
}

fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// e_step responsibilities and log-likelihood vs the linear-space oracle.
pub fn check_e_step(instances: u64) -> Result<String, String> {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(1000 + seed);
        let g = 1 + (seed as usize % 4);
        let d = 1 + (seed as usize % 3);
        let model = random_model(&mut r, g, d);
        let data = normal_matrix(&mut r, 5 + (seed as usize % 20), d) * 1.5;
        let (z, ll) = e_step(&model, &data).map_err(|e| e.to_string())?;
        let (zo, llo) = oracle_e_step(&model, &data);
        for (i, row) in zo.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                let got = z.matrix()[(i, k)];
                if !close(got, v, REL_TOL) {
                    return Err(format!("seed {seed}: z[{i},{k}] = {got:e}, oracle {v:e}"));
                }
                worst = worst.max((got - v).abs() / v.abs().max(1e-300));
            }
        }
        if !close(ll, llo, REL_TOL) {
            return Err(format!("seed {seed}: loglik {ll} vs oracle {llo}"));
        }
    }
    Ok(format!("{instances} instances, worst rel err {worst:.1e}"))
}

pub fn check_m_step(instances: u64) -> Result<String, String> {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(2000 + seed);
        let g = 1 + (seed as usize % 4);
        let d = 1 + (seed as usize % 4);
        let n = 8 + (seed as usize % 30);
        let data = normal_matrix(&mut r, n, d) * 3.0;
        let z = random_responsibilities(&mut r, n, g);
        let model = m_step(&data, &z).map_err(|e| e.to_string())?;
        for (c, (w, mean, cov)) in model
            .components()
            .iter()
            .zip(oracle_m_step(&data, z.matrix()))
        {
            let mut cmp = |got: f64, want: f64, what: &str| {
                worst = worst.max((got - want).abs() / want.abs().max(1e-300));
                if close(got, want, REL_TOL) {
                    Ok(())
                } else {
                    Err(format!("seed {seed}: {what} {got:e} vs oracle {want:e}"))
                }
            };
            cmp(c.weight, w, "weight")?;
            for j in 0..d {
                cmp(c.mean[j], mean[j], "mean")?;
                for k in 0..d {
                    cmp(c.covariance[(j, k)], cov[j][k], "covariance")?;
                }
            }
        }
    }
    Ok(format!("{instances} instances, worst rel err {worst:.1e}"))
}

pub fn check_relative_param_difference(instances: u64) -> Result<String, String> {
    for seed in 0..instances {
        let mut r = rng(3000 + seed);
        let g = 1 + (seed as usize % 4);
        let d = 1 + (seed as usize % 4);
        let prev = ParamSnapshot::from(&random_model(&mut r, g, d));
        let curr = prev.map(|v| v * (1.0 + 0.1 * r.sample::<f64, _>(StandardNormal)));
        let got = relative_param_difference(&prev, &curr).map_err(|e| e.to_string())?;
        let want = oracle_r_theta(&prev, &curr);
        if !close(got, want, REL_TOL) {
            return Err(format!("seed {seed}: R = {got} vs oracle {want}"));
        }
    }
    Ok(format!("{instances} instances"))
}

pub fn random_series(r: &mut impl Rng, len: usize, kind: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(len);
    let mut prev = 0.0;
    for t in 0..len {
        let e: f64 = r.sample(StandardNormal);
        let v = match kind % 4 {
            0 => e,
            1 => {
                prev = 0.9 * prev + e;
                prev
            }
            2 => (if t % 2 == 0 { 1.0 } else { -1.0 }) + 0.1 * e,
            _ => -5000.0 + 0.3 * t as f64 + e,
        };
        y.push(v);
    }
    y
}

pub fn check_durbin_watson(instances: u64) -> Result<String, String> {
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..instances {
        let mut r = rng(4000 + seed);
        let y = random_series(&mut r, 5 + (seed as usize * 7) % 300, seed as usize);
        let got = durbin_watson(&y).map_err(|e| e.to_string())?.statistic;
        let want = oracle_durbin_watson(&y);
        if !close(got, want, REL_TOL) {
            return Err(format!("seed {seed}: DW = {got} vs oracle {want}"));
        }
        range = (range.0.min(got), range.1.max(got));
    }
    Ok(format!(
        "{instances} instances, statistic range [{:.3}, {:.3}]",
        range.0, range.1
    ))
}

pub fn check_bic_and_free_parameters(instances: u64) -> Result<String, String> {
    for seed in 0..instances {
        let mut r = rng(5000 + seed);
        let g = r.random_range(1..10);
        let p = r.random_range(1..60);
        let n = r.random_range(1..100_000);
        let ll = r.random_range(-1e6..1e3);
        let rho =
            count_free_parameters(g, p, ParameterFamily::FullGmm).map_err(|e| e.to_string())?;
        let rho_o = oracle_free_parameters(g, p);
        if rho != rho_o {
            return Err(format!("G={g} p={p}: {rho} parameters vs oracle {rho_o}"));
        }
        let got = bic(ll, rho, n);
        let want = 2.0 * ll - rho_o as f64 * (n as f64).ln();
        if !close(got, want, REL_TOL) {
            return Err(format!("seed {seed}: BIC {got} vs oracle {want}"));
        }
    }
    Ok(format!("{instances} instances"))
}

pub fn check_ari(instances: u64) -> Result<String, String> {
    for seed in 0..instances {
        let mut r = rng(6000 + seed);
        let n = r.random_range(2..60);
        let ka = r.random_range(1..6);
        let kb = r.random_range(1..6);
        let a: Vec<usize> = (0..n).map(|_| r.random_range(0..ka)).collect();
        // mix of independent and perturbed-copy labelings
        let b: Vec<usize> = if seed % 2 == 0 {
            (0..n).map(|_| r.random_range(0..kb)).collect()
        } else {
            a.iter()
                .map(|&l| {
                    if r.random_bool(0.2) {
                        r.random_range(0..kb)
                    } else {
                        l
                    }
                })
                .collect()
        };
        let got = adjusted_rand_index(&a, &b).map_err(|e| e.to_string())?;
        let want = oracle_ari(&a, &b);
        if (got - want).abs() > REL_TOL * want.abs().max(1.0) {
            return Err(format!("seed {seed}: ARI {got} vs oracle {want}"));
        }
    }
    Ok(format!("{instances} instances"))
}

/// Singular values, subspace and reconstruction error of the spectral
/// embedding against the Jacobi oracle. Includes shapes above the dense
/// threshold so both decomposition routes are covered.
pub fn check_spectral_optimality() -> Result<String, String> {
    let shapes = [
        (40, 10, 2),
        (12, 30, 3),
        (60, 60, 4),
        (600, 12, 3),
        (10, 700, 3),
        (200, 40, 1),
    ];
    let mut worst = 0.0f64;
    for (idx, &(n, p, g)) in shapes.iter().enumerate() {
        let mut r = rng(7000 + idx as u64);
        // planted low-rank signal so the leading gaps are clear
        let signal = normal_matrix(&mut r, n, g) * normal_matrix(&mut r, g, p) * 3.0;
        let x = signal + normal_matrix(&mut r, n, p);
        let emb = spectral_transform(&x, g).map_err(|e| e.to_string())?;
        let (sigma, v) = oracle_svd(&x, g);
        for k in 0..g {
            let err = (emb.singular_values[k] - sigma[k]).abs() / sigma[k];
            worst = worst.max(err);
            if err > REL_TOL {
                return Err(format!(
                    "{n}x{p}: sigma_{k} {} vs oracle {}",
                    emb.singular_values[k], sigma[k]
                ));
            }
        }
        let proj = &emb.basis * emb.basis.transpose();
        let proj_o = &v * v.transpose();
        let perr = max_abs(&(&proj - &proj_o));
        worst = worst.max(perr);
        if perr > REL_TOL {
            return Err(format!("{n}x{p}: projector differs by {perr:e}"));
        }
        let residual = (&x - &emb.embedded * emb.basis.transpose()).norm_squared();
        let optimum: f64 = sigma[g..].iter().map(|s| s * s).sum();
        let rerr = (residual - optimum).abs() / optimum;
        worst = worst.max(rerr);
        if rerr > REL_TOL {
            return Err(format!("{n}x{p}: residual {residual} vs optimum {optimum}"));
        }
        let yerr = max_abs(&(&emb.embedded - &x * &emb.basis)) / max_abs(&emb.embedded);
        if yerr > 1e-12 {
            return Err(format!("{n}x{p}: embedding is not X V ({yerr:e})"));
        }
    }
    Ok(format!(
        "{} shapes, worst rel err {worst:.1e}",
        shapes.len()
    ))
}

/// Log-likelihood never decreases across EM iterations.
pub fn check_em_monotone(instances: u64) -> Result<String, String> {
    use specboot::datagen::generate_gmm;
    use specboot::gmm::{fit_em, EmOptions, InitStrategy};
    let mut steps = 0;
    for seed in 0..instances {
        let mut r = rng(8000 + seed);
        let g = 1 + (seed as usize % 3);
        let d = 1 + (seed as usize % 4);
        let model = random_model(&mut r, g, d);
        let data = generate_gmm(&model, 60 + 10 * g * d, seed)
            .map_err(|e| e.to_string())?
            .data;
        let init = if seed % 2 == 0 {
            InitStrategy::KMeans { seed, restarts: 2 }
        } else {
            InitStrategy::Random { seed }
        };
        let options = EmOptions {
            eps: 1e-10,
            max_iter: 300,
        };
        let fit = match fit_em(&data, g, &init, &options) {
            Ok(f) => f,
            // a random start can empty a component; monotonicity is moot there
            Err(specboot::Error::EmptyComponent { .. }) => continue,
            Err(e) => return Err(format!("seed {seed}: {e}")),
        };
        for w in fit.trace.windows(2) {
            steps += 1;
            if w[1] < w[0] - 1e-8 * w[0].abs().max(1.0) {
                return Err(format!(
                    "seed {seed}: log-likelihood fell from {} to {}",
                    w[0], w[1]
                ));
            }
        }
    }
    Ok(format!("{instances} fits, {steps} steps"))
}

/// Responsibility rows sum to one, including for points far in the tails.
pub fn check_row_normalisation(instances: u64) -> Result<String, String> {
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(9000 + seed);
        let g = 1 + (seed as usize % 5);
        let d = 1 + (seed as usize % 6);
        let model = random_model(&mut r, g, d);
        let scale = [1.0, 10.0, 100.0, 1000.0][seed as usize % 4];
        let data = normal_matrix(&mut r, 30, d) * scale;
        let (z, _) = e_step(&model, &data).map_err(|e| e.to_string())?;
        for row in z.matrix().row_iter() {
            worst = worst.max((row.sum() - 1.0).abs());
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(format!("seed {seed}: responsibility outside [0,1]"));
            }
        }
    }
    if worst > 1e-10 {
        return Err(format!("row sums off by {worst:e}"));
    }
    Ok(format!(
        "{instances} instances, worst |sum - 1| {worst:.1e}"
    ))
}

/// The running mean and standard deviation of a stream of estimates equal
/// the batch statistics.
pub fn check_running_average(instances: u64) -> Result<String, String> {
    use specboot::bootstrap::BootstrapState;
    let mut worst = 0.0f64;
    for seed in 0..instances {
        let mut r = rng(10_000 + seed);
        let g = 1 + (seed as usize % 3);
        let d = 1 + (seed as usize % 3);
        let k = 2 + (seed as usize % 40);
        let models: Vec<MixtureModel> = (0..k).map(|_| random_model(&mut r, g, d)).collect();
        let mut state = BootstrapState::new(1, g);
        for m in &models {
            state.update_average(m).map_err(|e| e.to_string())?;
        }
        let snaps: Vec<ParamSnapshot> = models.iter().map(ParamSnapshot::from).collect();
        let avg = state.averaged().expect("non-empty");
        let sd = state.std_errors().map_err(|e| e.to_string())?;
        let flat = |s: &ParamSnapshot| -> Vec<f64> {
            let mut v: Vec<f64> = s.weights.iter().copied().collect();
            v.extend(s.means.iter());
            for c in &s.covariances {
                v.extend(c.iter());
            }
            v
        };
        let columns: Vec<Vec<f64>> = snaps.iter().map(flat).collect();
        let (got_mean, got_sd) = (flat(avg), flat(&sd));
        for j in 0..got_mean.len() {
            let xs: Vec<f64> = columns.iter().map(|c| c[j]).collect();
            let mean = xs.iter().sum::<f64>() / k as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            let scale = xs.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
            let e1 = (got_mean[j] - mean).abs() / scale;
            let e2 = (got_sd[j] - var.sqrt()).abs() / scale;
            worst = worst.max(e1).max(e2);
            if e1 > 1e-10 || e2 > 1e-10 {
                return Err(format!(
                    "seed {seed}: entry {j}: mean {} vs {mean}, sd {} vs {}",
                    got_mean[j],
                    got_sd[j],
                    var.sqrt()
                ));
            }
        }
    }
    Ok(format!("{instances} streams, worst err {worst:.1e}"))
}

/// Out-of-bag fraction of with-replacement draws approaches 1/e.
pub fn check_oob_fraction() -> Result<String, String> {
    use specboot::bootstrap::draw_sample;
    let n = 10_000;
    let mut fractions = Vec::new();
    for seed in 0..100 {
        let s = draw_sample(n, &mut rng(11_000 + seed));
        fractions.push(s.out_of_bag().count() as f64 / n as f64);
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    let (lo, hi) = fractions
        .iter()
        .fold((1.0f64, 0.0f64), |(a, b), &f| (a.min(f), b.max(f)));
    let target = (-1.0f64).exp();
    // each single draw has sd ~0.005, so individual seeds get a wider band
    if (mean - 0.368).abs() > 0.01 || lo < target - 0.025 || hi > target + 0.025 {
        return Err(format!("mean {mean:.4}, range [{lo:.4}, {hi:.4}]"));
    }
    Ok(format!(
        "mean {mean:.4} over 100 seeds, range [{lo:.4}, {hi:.4}]"
    ))
}

pub fn check_dw_range(instances: u64) -> Result<String, String> {
    for seed in 0..instances {
        let mut r = rng(12_000 + seed);
        let y = random_series(&mut r, 3 + (seed as usize * 13) % 500, seed as usize);
        let dw = durbin_watson(&y).map_err(|e| e.to_string())?;
        if !(0.0..=4.0).contains(&dw.statistic) || !(0.0..=1.0).contains(&dw.p_value) {
            return Err(format!(
                "seed {seed}: statistic {} p {}",
                dw.statistic, dw.p_value
            ));
        }
    }
    Ok(format!("{instances} series"))
}
