//! Declarative Monte-Carlo experiments.
//!
//! A config names a model, a true parameter, an estimator and a grid of
//! particle counts × horizons. Every (cell, trial) pair is an independent
//! simulate-then-estimate job seeded by `derive_seed(master, [cell, trial])`,
//! so results do not depend on the number of workers. Trials whose estimator
//! fails numerically are recorded as exclusions; above 1% the run fails but
//! still hands back what it computed.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_bytes, fmt_f64, indexed, parse_field, read_csv, sidecar, write_file};
use crate::models::{ModelKind, ModelSpec, Theta};
use crate::offline::{closed_form_run, mle_numeric, MleOptions};
use crate::online::{run_online, EstimatorMode, InitSpec, LearningRate, OnlineConfig, Schedule};
use crate::rng::{derive_seed, stream_rng, PARAMETER_INIT_STREAM};
use crate::simulate::{simulate_ips, InitialCondition, SimConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "MKV_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    OfflineClosed,
    OfflineNumeric,
    OnlineAveraged,
    OnlinePerParticle,
}

impl EstimatorKind {
    pub fn is_online(self) -> bool {
        matches!(self, EstimatorKind::OnlineAveraged | EstimatorKind::OnlinePerParticle)
    }
}

/// Particle counts × horizons. Cell `i·|horizons| + j` is `(n[i], horizons[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: Vec<usize>,
    pub horizons: Vec<f64>,
}

impl Grid {
    pub fn cells(&self) -> Vec<(usize, f64)> {
        self.n
            .iter()
            .flat_map(|&n| self.horizons.iter().map(move |&t| (n, t)))
            .collect()
    }
}

fn default_sigma() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub name: String,
    pub model: String,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub theta_true: Theta,
    pub estimator: EstimatorKind,
    pub grid: Grid,
    pub trials: usize,
    pub dt: f64,
    /// Initial particle distribution.
    #[serde(default)]
    pub init: InitialCondition,
    /// Online learning rates, one schedule per coordinate.
    #[serde(default)]
    pub lr: Option<LearningRate>,
    /// Initial estimate for online runs and the numeric optimizer. The
    /// numeric optimizer starts at the truth when this is absent.
    #[serde(default)]
    pub theta_init: Option<InitSpec>,
    #[serde(default)]
    pub mle: MleOptions,
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        ModelSpec::from_name(&self.model)?.with_sigma(self.sigma)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.grid.n.is_empty() || self.grid.horizons.is_empty() {
            return bad("grid needs at least one N and one horizon".into());
        }
        if self.grid.n.contains(&0) {
            return bad("grid N values must be at least 1".into());
        }
        let model = self.model_spec()?;
        model.check_theta(&self.theta_true)?;
        for &(n, t) in &self.grid.cells() {
            SimConfig::new(n, self.dt, t, 0).with_init(self.init.clone()).steps()?;
        }
        let p = model.param_dim();
        if let Some(init) = &self.theta_init {
            init.validate()?;
            if init.0.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "theta_init",
                    expected: p,
                    got: init.0.len(),
                });
            }
        }
        match self.estimator {
            EstimatorKind::OfflineClosed if model.kind() != ModelKind::LinearMeanField => {
                bad("offline-closed needs the linear model".into())
            }
            k if k.is_online() => {
                let lr = match &self.lr {
                    Some(lr) => lr,
                    None => return bad("online estimators need `lr`".into()),
                };
                if self.theta_init.is_none() {
                    return bad("online estimators need `theta_init`".into());
                }
                lr.0.iter().try_for_each(Schedule::validate)?;
                if lr.len() != p {
                    return Err(Error::DimensionMismatch {
                        what: "lr schedules",
                        expected: p,
                        got: lr.len(),
                    });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// One successful trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub cell: usize,
    pub n: usize,
    pub t: f64,
    pub trial: usize,
    pub seed: u64,
    /// Offline: the MLE. Online: terminal estimate (per-particle mode: mean
    /// over particles).
    pub estimate: Vec<f64>,
    /// Squared error per coordinate (per-particle mode: mean over particles).
    pub sq_err: Vec<f64>,
    /// Absolute error per coordinate (per-particle mode: mean over particles).
    pub abs_err: Vec<f64>,
}

impl ResultRow {
    pub fn sq_err_joint(&self) -> f64 {
        self.sq_err.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub reason: String,
}

/// Per-cell aggregates, recomputable from the rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub n: usize,
    pub t: f64,
    pub rows: usize,
    pub excluded: usize,
    pub mean_estimate: Vec<f64>,
    pub mse: Vec<f64>,
    /// Standard error of the MSE (zero with fewer than two rows).
    pub mse_stderr: Vec<f64>,
    pub mae: Vec<f64>,
    pub mae_stderr: Vec<f64>,
    pub median_abs_err: Vec<f64>,
    pub mse_joint: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub generator: String,
    pub version: String,
}

impl Default for Metadata {
    fn default() -> Self {
        Metadata {
            generator: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub metadata: Metadata,
    pub rows: Vec<ResultRow>,
    pub exclusions: Vec<Exclusion>,
    pub summary: Vec<CellSummary>,
}

impl ExperimentResult {
    pub fn cell_summary(&self, n: usize, t: f64) -> Option<&CellSummary> {
        self.summary.iter().find(|s| s.n == n && s.t == t)
    }

    pub fn param_dim(&self) -> usize {
        self.config.theta_true.len()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn stderr(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Aggregates rows and exclusions cell by cell, in cell order.
pub fn summarize(grid: &Grid, p: usize, rows: &[ResultRow], exclusions: &[Exclusion]) -> Vec<CellSummary> {
    grid.cells()
        .into_iter()
        .enumerate()
        .map(|(cell, (n, t))| {
            let cell_rows: Vec<&ResultRow> = rows.iter().filter(|r| r.cell == cell).collect();
            let excluded = exclusions.iter().filter(|e| e.cell == cell).count();
            let column = |f: &dyn Fn(&ResultRow) -> f64| -> Vec<f64> { cell_rows.iter().map(|r| f(r)).collect() };
            let mut s = CellSummary {
                cell,
                n,
                t,
                rows: cell_rows.len(),
                excluded,
                mean_estimate: Vec::new(),
                mse: Vec::new(),
                mse_stderr: Vec::new(),
                mae: Vec::new(),
                mae_stderr: Vec::new(),
                median_abs_err: Vec::new(),
                mse_joint: 0.0,
            };
            if cell_rows.is_empty() {
                return s;
            }
            for j in 0..p {
                let est = column(&|r| r.estimate[j]);
                let sq = column(&|r| r.sq_err[j]);
                let ab = column(&|r| r.abs_err[j]);
                s.mean_estimate.push(mean(&est));
                s.mse.push(mean(&sq));
                s.mse_stderr.push(stderr(&sq));
                s.mae.push(mean(&ab));
                s.mae_stderr.push(stderr(&ab));
                s.median_abs_err.push(median(&ab));
            }
            s.mse_joint = mean(&column(&|r| r.sq_err_joint()));
            s
        })
        .collect()
}

/// Worker count from `MKV_WORKERS`, or `None` for the rayon default.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(Some(w)),
            _ => Err(Error::InvalidConfig(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

enum TrialOutcome {
    Row(ResultRow),
    Excluded(Exclusion),
}

fn errors_of(estimate: &[f64], truth: &Theta) -> (Vec<f64>, Vec<f64>) {
    estimate
        .iter()
        .zip(truth.iter())
        .map(|(e, t)| ((e - t) * (e - t), (e - t).abs()))
        .unzip()
}

fn run_trial(cfg: &ExperimentConfig, model: &ModelSpec, cell: usize, n: usize, t: f64, trial: usize) -> Result<TrialOutcome> {
    let seed = derive_seed(cfg.master_seed, &[cell as u64, trial as u64]);
    let sim = SimConfig::new(n, cfg.dt, t, seed).with_init(cfg.init.clone());
    let truth = &cfg.theta_true;
    let attempt: Result<(Vec<f64>, Vec<f64>, Vec<f64>)> = match cfg.estimator {
        EstimatorKind::OfflineClosed => closed_form_run(model, truth, &sim).map(|th| {
            let (sq, ab) = errors_of(&th, truth);
            (th.into_vec(), sq, ab)
        }),
        EstimatorKind::OfflineNumeric => (|| {
            let start = match &cfg.theta_init {
                Some(spec) => spec.sample(&mut stream_rng(seed, PARAMETER_INIT_STREAM))?,
                None => truth.clone(),
            };
            let traj = simulate_ips(model, truth, &sim)?;
            let out = mle_numeric(model, &traj, &start, &cfg.mle)?;
            let (sq, ab) = errors_of(&out.theta, truth);
            Ok((out.theta.into_vec(), sq, ab))
        })(),
        EstimatorKind::OnlineAveraged | EstimatorKind::OnlinePerParticle => {
            let mode = if cfg.estimator == EstimatorKind::OnlineAveraged {
                EstimatorMode::Averaged
            } else {
                EstimatorMode::PerParticle
            };
            let oc = OnlineConfig {
                lr: cfg.lr.clone().expect("validated"),
                init: cfg.theta_init.clone().expect("validated"),
                mode,
                max_history: 2,
            };
            run_online(model, truth, &sim, &oc)
                .map(|run| (run.final_mean(), run.terminal_sq_error(truth), run.terminal_abs_error(truth)))
        }
    };
    match attempt {
        Ok((estimate, sq_err, abs_err)) => Ok(TrialOutcome::Row(ResultRow {
            cell,
            n,
            t,
            trial,
            seed,
            estimate,
            sq_err,
            abs_err,
        })),
        Err(
            e @ (Error::Degenerate(_)
            | Error::NoConvergence { .. }
            | Error::SimulationDiverged { .. }
            | Error::EstimatorDiverged { .. }),
        ) => Ok(TrialOutcome::Excluded(Exclusion {
            cell,
            trial,
            seed,
            reason: e.to_string(),
        })),
        Err(e) => Err(e),
    }
}

/// Runs the experiment with the worker count from `MKV_WORKERS`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_experiment_with_workers(cfg, workers_from_env()?)
}

/// Runs every (cell, trial) job on a pool of `workers` threads (rayon's
/// default when `None`). The result is identical for any worker count.
///
/// Fails with [`Error::ExclusionCap`] when more than 1% of trials are
/// excluded; the error carries the full result.
pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let model = cfg.model_spec()?;
    let cells = cfg.grid.cells();
    let jobs: Vec<(usize, usize, f64, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, &(n, t))| (0..cfg.trials).map(move |k| (c, n, t, k)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    log::info!("experiment '{}': {} jobs on {} workers", cfg.name, jobs.len(), pool.current_num_threads());
    let outcomes: Vec<Result<TrialOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, n, t, k)| run_trial(cfg, &model, c, n, t, k))
            .collect()
    });
    let mut rows = Vec::with_capacity(jobs.len());
    let mut exclusions = Vec::new();
    for out in outcomes {
        match out? {
            TrialOutcome::Row(r) => rows.push(r),
            TrialOutcome::Excluded(e) => exclusions.push(e),
        }
    }
    let summary = summarize(&cfg.grid, model.param_dim(), &rows, &exclusions);
    let result = ExperimentResult {
        config: cfg.clone(),
        metadata: Metadata::default(),
        rows,
        exclusions,
        summary,
    };
    let total = jobs.len();
    let excluded = result.exclusions.len();
    if excluded * 100 > total {
        return Err(Error::ExclusionCap {
            excluded,
            total,
            result: Box::new(result),
        });
    }
    Ok(result)
}

/// Least-squares fit of `log y = intercept + slope · log x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            what: "fit_rate inputs",
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 4 {
        return Err(Error::InvalidParameter(format!("fit_rate needs at least 4 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParameter("fit_rate needs positive finite inputs".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("fit_rate needs at least two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { slope, intercept, r2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            _ => Err(Error::InvalidConfig(format!("unknown export format '{s}'"))),
        }
    }
}

fn rows_header(p: usize) -> Vec<String> {
    let mut h: Vec<String> = ["cell", "n", "t", "trial", "seed"].iter().map(|s| s.to_string()).collect();
    h.extend(indexed("estimate", p));
    h.extend(indexed("sq_err", p));
    h.extend(indexed("abs_err", p));
    h.push("sq_err_joint".into());
    h
}

fn summary_header(p: usize) -> Vec<String> {
    let mut h: Vec<String> = ["cell", "n", "t", "rows", "excluded"].iter().map(|s| s.to_string()).collect();
    for name in ["mean_estimate", "mse", "mse_stderr", "mae", "mae_stderr", "median_abs_err"] {
        h.extend(indexed(name, p));
    }
    h.push("mse_joint".into());
    h
}

const COLUMN_DICTIONARY: &str = "\
Rows file (one line per successful trial)
  cell            grid cell index; cell = i_N * len(horizons) + i_T
  n               number of particles
  t               observation horizon
  trial           trial index within the cell
  seed            simulation seed, derived from (master_seed, cell, trial)
  estimate_j      estimate of coordinate j (per-particle online: mean over particles)
  sq_err_j        squared error of coordinate j (per-particle online: mean over particles)
  abs_err_j       absolute error of coordinate j (per-particle online: mean over particles)
  sq_err_joint    sum over j of sq_err_j

Summary file (one line per cell)
  rows, excluded  successful and excluded trials
  mean_estimate_j mean of estimate_j
  mse_j           mean of sq_err_j
  mse_stderr_j    standard error of mse_j (0 with fewer than two rows)
  mae_j           mean of abs_err_j
  mae_stderr_j    standard error of mae_j
  median_abs_err_j median of abs_err_j
  mse_joint       mean of sq_err_joint

Exclusions file
  cell, trial, seed, reason

Residual tables written by `offline --normality` use the columns
  trial, comp1, comp2   with comp_j = sqrt(N) * (estimate_j - truth_j)

Floats are written with 17 significant digits.
";

/// Writes the result. CSV produces `out.csv` (rows), `out.summary.csv`,
/// `out.exclusions.csv`, `out.columns.txt` and `out.meta.json` (config and
/// metadata); JSON writes everything into one file.
pub fn export(result: &ExperimentResult, path: &Path, format: ExportFormat) -> Result<Vec<PathBuf>> {
    let p = result.param_dim();
    match format {
        ExportFormat::Json => {
            let text = serde_json::to_string_pretty(result).map_err(|e| Error::format(path, e.to_string()))?;
            write_file(path, text.as_bytes())?;
            Ok(vec![path.to_path_buf()])
        }
        ExportFormat::Csv => {
            let rows: Vec<Vec<String>> = result
                .rows
                .iter()
                .map(|r| {
                    let mut rec = vec![r.cell.to_string(), r.n.to_string(), fmt_f64(r.t), r.trial.to_string(), r.seed.to_string()];
                    rec.extend(r.estimate.iter().chain(&r.sq_err).chain(&r.abs_err).map(|&v| fmt_f64(v)));
                    rec.push(fmt_f64(r.sq_err_joint()));
                    rec
                })
                .collect();
            let summary: Vec<Vec<String>> = result
                .summary
                .iter()
                .map(|s| {
                    let mut rec = vec![s.cell.to_string(), s.n.to_string(), fmt_f64(s.t), s.rows.to_string(), s.excluded.to_string()];
                    for col in [&s.mean_estimate, &s.mse, &s.mse_stderr, &s.mae, &s.mae_stderr, &s.median_abs_err] {
                        if col.is_empty() {
                            rec.extend(std::iter::repeat_n(String::new(), p));
                        } else {
                            rec.extend(col.iter().map(|&v| fmt_f64(v)));
                        }
                    }
                    rec.push(if s.rows == 0 { String::new() } else { fmt_f64(s.mse_joint) });
                    rec
                })
                .collect();
            let excl: Vec<Vec<String>> = result
                .exclusions
                .iter()
                .map(|e| vec![e.cell.to_string(), e.trial.to_string(), e.seed.to_string(), e.reason.clone()])
                .collect();
            let meta = serde_json::json!({ "config": result.config, "metadata": result.metadata });
            let files = [
                (path.to_path_buf(), csv_bytes(rows_header(p), rows)),
                (sidecar(path, "summary.csv"), csv_bytes(summary_header(p), summary)),
                (
                    sidecar(path, "exclusions.csv"),
                    csv_bytes(["cell", "trial", "seed", "reason"].iter().map(|s| s.to_string()).collect(), excl),
                ),
                (sidecar(path, "columns.txt"), COLUMN_DICTIONARY.as_bytes().to_vec()),
                (
                    sidecar(path, "meta.json"),
                    serde_json::to_string_pretty(&meta).expect("serializable").into_bytes(),
                ),
            ];
            for (f, bytes) in &files {
                write_file(f, bytes)?;
            }
            Ok(files.into_iter().map(|(f, _)| f).collect())
        }
    }
}

/// Writes `<stem>.timing.json` next to `path`. Wall time is kept out of
/// the result files so those stay bit-identical across reruns.
pub fn sidecar_timing(path: &Path, wall_seconds: f64) -> Result<PathBuf> {
    let f = sidecar(path, "timing.json");
    let text = serde_json::json!({ "wall_seconds": wall_seconds }).to_string();
    write_file(&f, text.as_bytes())?;
    Ok(f)
}

/// Reads back a result written by [`export`]; for CSV, `path` is the rows
/// file and the summary is recomputed from the rows.
pub fn import(path: &Path, format: ExportFormat) -> Result<ExperimentResult> {
    match format {
        ExportFormat::Json => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
        }
        ExportFormat::Csv => {
            let meta_path = sidecar(path, "meta.json");
            let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
            #[derive(Deserialize)]
            struct Meta {
                config: ExperimentConfig,
                metadata: Metadata,
            }
            let meta: Meta = serde_json::from_str(&text).map_err(|e| Error::format(&meta_path, e.to_string()))?;
            let p = meta.config.theta_true.len();
            let (header, records) = read_csv(path)?;
            if header != rows_header(p) {
                return Err(Error::format(path, "unexpected rows header"));
            }
            let mut rows = Vec::with_capacity(records.len());
            for rec in &records {
                let f = |i: usize| -> Result<f64> { parse_field(path, &rec[i]) };
                let vals = |off: usize| -> Result<Vec<f64>> { (off..off + p).map(f).collect() };
                rows.push(ResultRow {
                    cell: parse_field(path, &rec[0])?,
                    n: parse_field(path, &rec[1])?,
                    t: f(2)?,
                    trial: parse_field(path, &rec[3])?,
                    seed: parse_field(path, &rec[4])?,
                    estimate: vals(5)?,
                    sq_err: vals(5 + p)?,
                    abs_err: vals(5 + 2 * p)?,
                });
            }
            let excl_path = sidecar(path, "exclusions.csv");
            let (_, excl_records) = read_csv(&excl_path)?;
            let exclusions = excl_records
                .iter()
                .map(|rec| {
                    Ok(Exclusion {
                        cell: parse_field(&excl_path, &rec[0])?,
                        trial: parse_field(&excl_path, &rec[1])?,
                        seed: parse_field(&excl_path, &rec[2])?,
                        reason: rec[3].clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let summary = summarize(&meta.config.grid, p, &rows, &exclusions);
            Ok(ExperimentResult {
                config: meta.config,
                metadata: meta.metadata,
                rows,
                exclusions,
                summary,
            })
        }
    }
}
