//! Command-line interface: `simulate`, `fit` and `benchmark`.
//!
//! Run configuration is layered: built-in defaults, then an optional TOML
//! file (`--config`), then individual flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::algorithms::{fit, Algorithm, EstimationSpace, FitResult, MembershipSummary, RunConfig};
use crate::convergence::ParamSnapshot;
use crate::datagen::{generate_cross_over, generate_mirror, generate_separated, LabeledDataset};
use crate::error::{Error, Result};
use crate::gmm::InitMethod;
use crate::io::{self, LabelTable};
use crate::metrics::{adjusted_rand_index, classification_rate};
use crate::Matrix;

/// Exit code when a benchmark completes but some of its runs failed.
pub const EXIT_PARTIAL_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "specboot",
    version,
    about = "Gaussian mixtures with spectral embeddings and bootstrap-averaged EM"
)]
pub struct Cli {
    /// More logging (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a simulated dataset and its labels as CSV.
    Simulate(SimulateArgs),
    /// Fit one estimator to a CSV data file.
    Fit(FitArgs),
    /// Time several estimators over repeated seeds.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(subcommand)]
    pub kind: SimulateKind,

    /// Data CSV to write.
    #[arg(short, long, global = true, default_value = "data.csv")]
    pub output: PathBuf,

    /// Labels CSV to write (default: `<output stem>.labels.csv`).
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Subcommand)]
pub enum SimulateKind {
    /// Two mirrored groups plus one point at the origin.
    Mirror(MirrorParams),
    /// Two groups whose means cross, plus observations that switch group.
    Crossover(CrossoverParams),
    /// Spherical groups with means on distinct axes.
    Gmm(GmmParams),
}

#[derive(Debug, Clone, Args)]
pub struct MirrorParams {
    #[arg(long, default_value_t = 500)]
    pub n_per_group: usize,
    #[arg(long, default_value_t = 150)]
    pub dim: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CrossoverParams {
    #[arg(long, default_value_t = 150)]
    pub n_per_group: usize,
    #[arg(long, default_value_t = 41)]
    pub time_points: usize,
    #[arg(long, default_value_t = 3)]
    pub changers: usize,
}

#[derive(Debug, Clone, Args)]
pub struct GmmParams {
    #[arg(long, default_value_t = 1080)]
    pub n: usize,
    #[arg(long, default_value_t = 381)]
    pub dim: usize,
    #[arg(long, default_value_t = 3)]
    pub groups: usize,
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
}

impl SimulateKind {
    fn name(&self) -> &'static str {
        match self {
            SimulateKind::Mirror(_) => "mirror",
            SimulateKind::Crossover(_) => "crossover",
            SimulateKind::Gmm(_) => "gmm",
        }
    }

    pub fn generate(&self, seed: u64) -> Result<LabeledDataset> {
        match self {
            SimulateKind::Mirror(p) => generate_mirror(p.n_per_group, p.dim, seed),
            SimulateKind::Crossover(p) => {
                generate_cross_over(p.n_per_group, p.time_points, p.changers, seed)
            }
            SimulateKind::Gmm(p) => generate_separated(p.n, p.dim, p.groups, p.separation, seed),
        }
    }
}

/// Estimator settings. Every flag is optional so that unset flags fall
/// through to the config file and then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with run settings (same names as the flags, snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(short, long, value_enum)]
    pub algorithm: Option<Algorithm>,
    /// Number of mixture components.
    #[arg(short = 'G', long)]
    pub groups: Option<usize>,
    /// EM lack-of-progress threshold.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Bootstrap parameter-change threshold.
    #[arg(long)]
    pub eps_b: Option<f64>,
    #[arg(long)]
    pub dw_alpha: Option<f64>,
    #[arg(long)]
    pub dw_window: Option<usize>,
    #[arg(long)]
    pub min_bootstrap: Option<usize>,
    #[arg(long)]
    pub max_bootstrap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub init: Option<InitMethod>,
    #[arg(long)]
    pub max_em_iter: Option<usize>,
    #[arg(long)]
    pub max_redraws: Option<usize>,
    /// Centre columns before the spectral embedding.
    #[arg(long)]
    pub center: Option<bool>,
    #[arg(long, value_enum)]
    pub membership: Option<MembershipSummary>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                toml::from_str::<RunConfig>(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        overlay!(
            algorithm,
            groups,
            eps,
            eps_b,
            dw_alpha,
            dw_window,
            max_bootstrap,
            seed,
            init,
            max_em_iter,
            max_redraws,
            center,
            membership
        );
        if self.min_bootstrap.is_some() {
            cfg.min_bootstrap = self.min_bootstrap;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Data CSV (one observation per row, optional header).
    pub data: PathBuf,

    #[command(flatten)]
    pub run: ConfigArgs,

    /// Directory for summary.json, memberships.csv, oob_memberships.csv
    /// and trace.csv.
    #[arg(short, long, default_value = "fit-out")]
    pub output: PathBuf,

    /// Labels CSV for scoring (classification rate, ARI, probe rows).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Data CSV; omit to simulate one with `--kind`.
    #[arg(long, conflicts_with = "kind")]
    pub data: Option<PathBuf>,

    /// Simulated dataset to benchmark on.
    #[arg(long, value_enum, default_value = "mirror")]
    pub kind: BenchKind,

    /// Seed for the simulated dataset.
    #[arg(long, default_value_t = 1)]
    pub data_seed: u64,

    /// Labels CSV flagging probe rows when `--data` is used.
    #[arg(long, requires = "data")]
    pub labels: Option<PathBuf>,

    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "boot-em,spectral-boot-em,boot-spectral"
    )]
    pub algorithms: Vec<Algorithm>,

    /// Runs per algorithm; repeat r uses seed `seed + r`.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,

    #[command(flatten)]
    pub run: ConfigArgs,

    /// Concurrent runs. Timings are only comparable with one thread.
    #[arg(long, env = "SPECBOOT_THREADS", default_value_t = 1)]
    pub threads: usize,

    #[arg(short, long, default_value = "benchmark.csv")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BenchKind {
    Mirror,
    Crossover,
    Gmm,
}

impl BenchKind {
    fn dataset(self, seed: u64) -> Result<LabeledDataset> {
        match self {
            BenchKind::Mirror => generate_mirror(500, 150, seed),
            BenchKind::Crossover => generate_cross_over(150, 41, 3, seed),
            BenchKind::Gmm => generate_separated(1080, 381, 3, 10.0, seed),
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate(args) => simulate(&args).map(|()| 0),
        Command::Fit(args) => fit_command(&args).map(|_| 0),
        Command::Benchmark(args) => benchmark(&args),
    }
}

fn labels_path_for(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    output.with_file_name(format!("{stem}.labels.csv"))
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let ds = args.kind.generate(args.seed)?;
    let columns = io::default_columns("x", ds.data.ncols());
    io::write_matrix_csv(&args.output, &columns, &ds.data)?;
    let labels = args
        .labels
        .clone()
        .unwrap_or_else(|| labels_path_for(&args.output));
    io::write_labels_csv(&labels, &ds.labels, &ds.special_indices)?;
    log::info!(
        "{}: wrote {}x{} to {} and labels to {}",
        args.kind.name(),
        ds.data.nrows(),
        ds.data.ncols(),
        args.output.display(),
        labels.display()
    );
    Ok(())
}

fn membership_columns(groups: usize) -> Vec<String> {
    io::default_columns("z", groups)
}

fn snapshot_json(s: &ParamSnapshot) -> Value {
    json!({
        "weights": s.weights.as_slice(),
        "means": rows(&s.means),
        "covariances": s.covariances.iter().map(rows).collect::<Vec<_>>(),
    })
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn space_json(space: EstimationSpace) -> Value {
    match space {
        EstimationSpace::Original => json!("original"),
        EstimationSpace::Spectral { rank } => json!(format!("spectral(rank={rank})")),
    }
}

/// The summary record written as `summary.json`.
pub fn summary_json(result: &FitResult, truth: Option<&LabelTable>) -> Result<Value> {
    let params = ParamSnapshot::from(&result.model);
    let mut summary = json!({
        "algorithm": result.algorithm.name(),
        "G": result.model.num_components(),
        "observations": result.observations,
        "dimension": result.model.dimension(),
        "log_likelihood": result.log_likelihood,
        "bic": result.bic(),
        "free_parameters": result.free_parameters(),
        // BIC values are only comparable between fits in the same space
        "estimation_space": space_json(result.estimation_space),
        "bootstrap_iterations": result.bootstrap_iterations,
        "converged": result.converged,
        "elapsed_seconds": result.elapsed_seconds,
        "svd_count": result.svd_count,
        "discarded_samples": result.discarded_samples,
        "parameters": snapshot_json(&params),
        "std_errors": result.std_errors.as_ref().map(snapshot_json),
    });
    if result.algorithm.is_bootstrapped() {
        summary["oob_unobserved"] = json!(result.oob_unobserved.len());
    }
    if let Some(truth) = truth {
        if truth.labels.len() != result.observations {
            return Err(Error::Dimension(format!(
                "{} labels for {} observations",
                truth.labels.len(),
                result.observations
            )));
        }
        let predicted = result.hard_labels();
        let probes: Vec<Value> = truth
            .special_indices()
            .into_iter()
            .map(|i| {
                let mut probe = json!({
                    "index": i,
                    "membership": result.memberships.row(i),
                });
                if let Some(oob) = &result.oob_memberships {
                    probe["oob_membership"] = json!(oob.row(i));
                }
                probe
            })
            .collect();
        summary["classification_rate"] = json!(classification_rate(&truth.labels, &predicted)?);
        summary["adjusted_rand_index"] = json!(adjusted_rand_index(&truth.labels, &predicted)?);
        summary["probes"] = json!(probes);
    }
    Ok(summary)
}

/// Long-format trace rows: `(iteration, metric, value)`.
pub fn trace_rows(result: &FitResult) -> Vec<(usize, &'static str, f64)> {
    let boot = result.algorithm.is_bootstrapped();
    let mut out = Vec::new();
    for t in &result.trace {
        out.push((t.iteration, "log_likelihood", t.log_likelihood));
        if boot {
            out.push((
                t.iteration,
                "sample_log_likelihood",
                t.sample_log_likelihood,
            ));
        }
        if let Some(r) = t.r_theta {
            out.push((t.iteration, "r_theta", r));
        }
        if let Some(d) = t.dw_statistic {
            out.push((t.iteration, "dw_statistic", d));
        }
    }
    out
}

pub fn fit_command(args: &FitArgs) -> Result<FitResult> {
    let config = args.run.resolve()?;
    let table = io::read_data_csv(&args.data)?;
    let truth = args.truth.as_ref().map(io::read_labels_csv).transpose()?;
    log::info!(
        "fitting {} with G={} to {}x{}",
        config.algorithm,
        config.groups,
        table.data.nrows(),
        table.data.ncols()
    );
    let result = fit(&table.data, &config)?;

    fs::create_dir_all(&args.output)?;
    let summary = summary_json(&result, truth.as_ref())?;
    fs::write(
        args.output.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))? + "\n",
    )?;
    let columns = membership_columns(config.groups);
    io::write_matrix_csv(
        args.output.join("memberships.csv"),
        &columns,
        result.memberships.matrix(),
    )?;
    if let Some(oob) = &result.oob_memberships {
        io::write_matrix_csv(
            args.output.join("oob_memberships.csv"),
            &columns,
            oob.matrix(),
        )?;
    }
    let mut w = csv::Writer::from_path(args.output.join("trace.csv"))?;
    w.write_record(["iteration", "metric", "value"])?;
    for (it, metric, value) in trace_rows(&result) {
        w.write_record([it.to_string(), metric.to_string(), value.to_string()])?;
    }
    w.flush()?;
    Ok(result)
}

/// One benchmark row; `error` is set for failed runs.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub algorithm: Algorithm,
    pub repeat: usize,
    pub seed: u64,
    pub outcome: std::result::Result<FitResult, String>,
}

pub fn benchmark_rows(
    data: &Matrix,
    base: &RunConfig,
    algorithms: &[Algorithm],
    repeats: usize,
    threads: usize,
) -> Result<Vec<BenchRow>> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    if threads == 0 {
        return Err(Error::InvalidArgument("threads must be at least 1".into()));
    }
    let jobs: Vec<(Algorithm, usize)> = algorithms
        .iter()
        .flat_map(|&a| (0..repeats).map(move |r| (a, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    // par_iter + collect keeps job order regardless of completion order
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|&(algorithm, repeat)| {
                let seed = base.seed.wrapping_add(repeat as u64);
                let config = RunConfig {
                    algorithm,
                    seed,
                    ..base.clone()
                };
                let outcome = fit(data, &config).map_err(|e| e.to_string());
                if let Err(e) = &outcome {
                    log::warn!("{algorithm} repeat {repeat} failed: {e}");
                }
                BenchRow {
                    algorithm,
                    repeat,
                    seed,
                    outcome,
                }
            })
            .collect()
    }))
}

pub fn write_benchmark_csv(
    path: impl AsRef<Path>,
    rows: &[BenchRow],
    probes: &[usize],
    groups: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = [
        "algorithm",
        "repeat",
        "seed",
        "status",
        "elapsed_seconds",
        "bootstrap_iterations",
        "converged",
        "log_likelihood",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for &i in probes {
        header.extend((1..=groups).map(|g| format!("row{i}_z{g}")));
    }
    header.push("error".into());
    w.write_record(&header)?;

    for row in rows {
        let mut rec = vec![
            row.algorithm.name().to_string(),
            row.repeat.to_string(),
            row.seed.to_string(),
        ];
        match &row.outcome {
            Ok(r) => {
                rec.push("ok".into());
                rec.push(r.elapsed_seconds.to_string());
                rec.push(
                    r.bootstrap_iterations
                        .map(|k| k.to_string())
                        .unwrap_or_default(),
                );
                rec.push(r.converged.to_string());
                rec.push(r.log_likelihood.to_string());
                for &i in probes {
                    rec.extend(r.memberships.row(i).iter().map(|v| v.to_string()));
                }
                rec.push(String::new());
            }
            Err(e) => {
                rec.push("failed".into());
                rec.extend(std::iter::repeat_n(
                    String::new(),
                    4 + probes.len() * groups,
                ));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn benchmark(args: &BenchmarkArgs) -> Result<i32> {
    let base = args.run.resolve()?;
    let (data, probes) = match &args.data {
        Some(path) => {
            let table = io::read_data_csv(path)?;
            let probes = match &args.labels {
                Some(l) => io::read_labels_csv(l)?.special_indices(),
                None => Vec::new(),
            };
            (table.data, probes)
        }
        None => {
            let ds = args.kind.dataset(args.data_seed)?;
            (ds.data, ds.special_indices)
        }
    };
    if let Some(&bad) = probes.iter().find(|&&i| i >= data.nrows()) {
        return Err(Error::InvalidArgument(format!(
            "probe row {bad} out of range"
        )));
    }
    let rows = benchmark_rows(&data, &base, &args.algorithms, args.repeats, args.threads)?;
    write_benchmark_csv(&args.output, &rows, &probes, base.groups)?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    log::info!("{} runs, {failed} failed", rows.len());
    Ok(if failed == 0 { 0 } else { EXIT_PARTIAL_FAILURE })
}
