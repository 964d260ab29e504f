//! Experiment runner: JSON configs in, seeded runs out, CSV traces and
//! summaries on disk.
//!
//! A config names one algorithm, one problem, an optional constraint set, a
//! schedule (theory rules or explicit practical values), a seed list, and an
//! `N` grid. [`run_experiment`] executes every `(seed, N)` pair on a bounded
//! worker pool, writes one trace CSV per run (atomically, temp-then-rename),
//! and aggregates final-row criteria into one summary CSV row per `N`.
//! [`trend_check`] fits a log-log slope to a summary column. Wall time is
//! informational only; every other output is a pure function of the config.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cg_solvers::{
    zscg, zscg_accelerated, zsgd_inexact_nonconvex, AcceleratedSchedule, InexactZsgdSchedule,
    OutputRule, RunOptions, ZscgSchedule,
};
use crate::constraints::ConstraintSet;
use crate::cubic::{zscrn, CubicParams};
use crate::error::{Result, ZoError};
use crate::estimators::{
    grad_averaged, grad_two_point, hess_three_point, smoothed_value_reference, SmoothingParams,
};
use crate::highdim::{zsgd, zsgd_truncated, HighDimSchedule};
use crate::oracle::{reference_gradient, ProblemConfig, ProblemSpec, ZeroOrderOracle};
use crate::rng::SeededStream;
use crate::trace::RunRecord;
use crate::DecisionVector;

/// Config format version accepted by this build.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Fixed summary column set; tests pin it.
pub const SUMMARY_HEADER: &str = "algorithm,d,N,seeds,failures,fw_gap_median,fw_gap_iqr,\
gp_norm_median,gp_norm_iqr,f_gap_median,f_gap_iqr,grad_l1_sq_median,grad_l1_sq_iqr,\
nnz_median,nnz_iqr,lambda_min_median,lambda_min_iqr,total_calls,wall_time_s";

const ALGORITHMS: &[&str] = &[
    "zscg_nonconvex",
    "zscg_convex",
    "zscg_accelerated",
    "zsgd_inexact",
    "zsgd_highdim",
    "zsgd_truncated",
    "zscrn",
];

fn needs_set(algorithm: &str) -> bool {
    matches!(
        algorithm,
        "zscg_nonconvex" | "zscg_convex" | "zscg_accelerated" | "zsgd_inexact"
    )
}

/// Schedule block of a config: a mode plus per-algorithm knobs.
///
/// `mode: "theory"` derives every rate-critical quantity from the problem
/// constants; the optional fields then act as overrides where a theory rule
/// leaves a free constant (`initial_gap`, `epsilon`, `gradient_bound`,
/// `moment_constant`, `sparsity_estimate`). `mode: "practical"` requires the
/// algorithm's explicit values (`nu`, step sizes, batches).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub mode: String,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub batch: Option<u64>,
    #[serde(default)]
    pub grad_batch: Option<usize>,
    #[serde(default)]
    pub hess_batch: Option<usize>,
    #[serde(default)]
    pub batch_scale: Option<f64>,
    #[serde(default)]
    pub sparsity_estimate: Option<usize>,
    #[serde(default)]
    pub moment_constant: Option<f64>,
    #[serde(default)]
    pub initial_gap: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub gradient_bound: Option<f64>,
    #[serde(default)]
    pub max_inner_iters: Option<usize>,
    #[serde(default)]
    pub subsolver_tol: Option<f64>,
    #[serde(default)]
    pub subsolver_max_iters: Option<usize>,
}

/// One experiment: an algorithm on a problem across seeds and `N` values.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub algorithm: String,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub set: Option<ConstraintSet>,
    pub schedule: ScheduleConfig,
    pub seeds: Vec<u64>,
    pub n_grid: Vec<usize>,
    /// Start point; `zscrn` only (the other solvers fix their own start).
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Default output directory; `--out` overrides it.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| ZoError::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ZoError::config(format!(
                "schema_version: expected {CONFIG_SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if !ALGORITHMS.contains(&self.algorithm.as_str()) {
            return Err(ZoError::config(format!(
                "algorithm: unknown '{}' (expected one of {})",
                self.algorithm,
                ALGORITHMS.join(", ")
            )));
        }
        if self.seeds.is_empty() {
            return Err(ZoError::config("seeds: must be nonempty"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &s in &self.seeds {
            if !seen.insert(s) {
                return Err(ZoError::config(format!("seeds: duplicate value {s}")));
            }
        }
        if self.n_grid.is_empty() {
            return Err(ZoError::config("n_grid: must be nonempty"));
        }
        if self.n_grid[0] == 0 {
            return Err(ZoError::config("n_grid: values must be positive"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ZoError::config("n_grid: must be strictly ascending"));
        }
        let problem = self.problem.build()?;
        match (&self.set, needs_set(self.algorithm.as_str())) {
            (None, true) => {
                return Err(ZoError::config(format!(
                    "set: required for {}",
                    self.algorithm
                )))
            }
            (Some(_), false) => {
                return Err(ZoError::config(format!(
                    "set: not supported by {} (unconstrained)",
                    self.algorithm
                )))
            }
            _ => {}
        }
        if let Some(x0) = &self.x0 {
            if self.algorithm != "zscrn" {
                return Err(ZoError::config("x0: only supported by zscrn"));
            }
            if x0.len() != problem.dimension() {
                return Err(ZoError::config(format!(
                    "x0: expected {} entries, got {}",
                    problem.dimension(),
                    x0.len()
                )));
            }
        }
        if self.schedule.mode != "theory" && self.schedule.mode != "practical" {
            return Err(ZoError::config(format!(
                "schedule.mode: expected 'theory' or 'practical', got '{}'",
                self.schedule.mode
            )));
        }
        // Build every schedule up front so bad knobs fail before any run.
        for &n in &self.n_grid {
            build_schedule(&problem, self.set.as_ref(), &self.algorithm, &self.schedule, n)?;
        }
        Ok(())
    }
}

enum BuiltSchedule {
    Zscg(ZscgSchedule),
    Accelerated(AcceleratedSchedule),
    Inexact(InexactZsgdSchedule),
    HighDim(HighDimSchedule),
    Cubic(CubicParams),
}

fn require<T: Copy>(value: Option<T>, key: &str, algorithm: &str) -> Result<T> {
    value.ok_or_else(|| {
        ZoError::config(format!("schedule.{key}: required for {algorithm} practical mode"))
    })
}

fn build_schedule(
    problem: &ProblemSpec,
    set: Option<&ConstraintSet>,
    algorithm: &str,
    cfg: &ScheduleConfig,
    n: usize,
) -> Result<BuiltSchedule> {
    let theory = cfg.mode == "theory";
    let set_for = |alg: &str| -> Result<&ConstraintSet> {
        set.ok_or_else(|| ZoError::config(format!("set: required for {alg}")))
    };
    match algorithm {
        "zscg_nonconvex" => {
            let set = set_for(algorithm)?;
            let schedule = if theory {
                ZscgSchedule::theory_nonconvex(problem, set, n)?
            } else {
                ZscgSchedule::custom(
                    n,
                    require(cfg.nu, "nu", algorithm)?,
                    require(cfg.alpha, "alpha", algorithm)?,
                    require(cfg.batch, "batch", algorithm)?,
                    OutputRule::UniformIterates,
                )?
            };
            Ok(BuiltSchedule::Zscg(schedule))
        }
        "zscg_convex" => {
            let set = set_for(algorithm)?;
            let schedule = if theory {
                ZscgSchedule::theory_convex(problem, set, n)?
            } else {
                let schedule = ZscgSchedule {
                    n_iters: n,
                    nu: require(cfg.nu, "nu", algorithm)?,
                    alpha: cfg.alpha,
                    batch: require(cfg.batch, "batch", algorithm)?,
                    output: OutputRule::GammaWeighted,
                };
                schedule.validate()?;
                schedule
            };
            Ok(BuiltSchedule::Zscg(schedule))
        }
        "zscg_accelerated" => {
            let set = set_for(algorithm)?;
            let schedule = if theory {
                AcceleratedSchedule::theory(problem, set, n, cfg.initial_gap)?
            } else {
                let schedule = AcceleratedSchedule {
                    n_iters: n,
                    nu: require(cfg.nu, "nu", algorithm)?,
                    lipschitz_grad: problem.lipschitz_grad(),
                    initial_gap_sq: cfg.initial_gap.unwrap_or_else(|| set.diameter().powi(2)),
                    batch_scale: require(cfg.batch_scale, "batch_scale", algorithm)?,
                    max_inner_iters: cfg.max_inner_iters.unwrap_or(200_000),
                };
                schedule.validate()?;
                schedule
            };
            Ok(BuiltSchedule::Accelerated(schedule))
        }
        "zsgd_inexact" => {
            let set = set_for(algorithm)?;
            let schedule = if theory {
                InexactZsgdSchedule::theory(problem, set, n)?
            } else {
                let schedule = InexactZsgdSchedule {
                    n_iters: n,
                    nu: require(cfg.nu, "nu", algorithm)?,
                    gamma: require(cfg.gamma, "gamma", algorithm)?,
                    mu: require(cfg.mu, "mu", algorithm)?,
                    batch: require(cfg.batch, "batch", algorithm)?,
                    max_inner_iters: cfg.max_inner_iters.unwrap_or(200_000),
                };
                schedule.validate()?;
                schedule
            };
            Ok(BuiltSchedule::Inexact(schedule))
        }
        "zsgd_highdim" | "zsgd_truncated" => {
            let schedule = if theory {
                // The theory rules fold s_hat and C_hat into gamma and nu, so
                // overriding them afterwards would desynchronize the schedule.
                if cfg.sparsity_estimate.is_some() {
                    return Err(ZoError::config(
                        "schedule.sparsity_estimate: derived from the problem in theory mode",
                    ));
                }
                if cfg.moment_constant.is_some() {
                    return Err(ZoError::config(
                        "schedule.moment_constant: fixed in theory mode",
                    ));
                }
                if algorithm == "zsgd_highdim" {
                    HighDimSchedule::theory_nonconvex(problem, n, cfg.initial_gap)?
                } else {
                    HighDimSchedule::theory_convex_truncated(problem, n, cfg.initial_gap)?
                }
            } else {
                let sparsity = match cfg.sparsity_estimate {
                    Some(s) => s,
                    None => problem.gradient_sparsity().max(1),
                };
                let mut schedule = HighDimSchedule::custom(
                    n,
                    require(cfg.gamma, "gamma", algorithm)?,
                    require(cfg.nu, "nu", algorithm)?,
                    sparsity,
                )?;
                if let Some(c) = cfg.moment_constant {
                    schedule.moment_constant = c;
                    schedule.validate()?;
                }
                schedule
            };
            Ok(BuiltSchedule::HighDim(schedule))
        }
        "zscrn" => {
            let mut params = if theory {
                let epsilon = cfg.epsilon.ok_or_else(|| {
                    ZoError::config("schedule.epsilon: required for zscrn theory mode")
                })?;
                let gradient_bound = cfg.gradient_bound.ok_or_else(|| {
                    ZoError::config("schedule.gradient_bound: required for zscrn theory mode")
                })?;
                let initial_gap = cfg.initial_gap.ok_or_else(|| {
                    ZoError::config("schedule.initial_gap: required for zscrn theory mode")
                })?;
                let mut p = CubicParams::theory(problem, epsilon, gradient_bound, initial_gap)?;
                // The grid's N governs run length; the derived N is advisory.
                p.n_iters = n;
                p
            } else {
                CubicParams::practical(
                    n,
                    require(cfg.nu, "nu", algorithm)?,
                    require(cfg.alpha, "alpha", algorithm)?,
                    require(cfg.grad_batch, "grad_batch", algorithm)?,
                    require(cfg.hess_batch, "hess_batch", algorithm)?,
                )?
            };
            if let Some(tol) = cfg.subsolver_tol {
                params.subsolver_tol = tol;
            }
            if let Some(cap) = cfg.subsolver_max_iters {
                params.subsolver_max_iters = cap;
            }
            params.validate()?;
            Ok(BuiltSchedule::Cubic(params))
        }
        other => Err(ZoError::config(format!("algorithm: unknown '{other}'"))),
    }
}

/// Options [`run_experiment`] takes from the CLI.
#[derive(Debug, Clone)]
pub struct ExperimentOptions {
    /// Overrides the config's `output_dir`.
    pub out_dir: Option<PathBuf>,
    /// Worker threads; `None` uses the rayon default.
    pub jobs: Option<usize>,
    /// Compute reference metrics in traces.
    pub verify: bool,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions { out_dir: None, jobs: None, verify: true }
    }
}

/// Median and interquartile range of one criterion across seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionStats {
    pub median: f64,
    pub iqr: f64,
}

/// One summary line: aggregates over seeds at a fixed `N`.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub dimension: usize,
    pub n_iters: usize,
    pub seed_count: usize,
    pub failures: usize,
    pub fw_gap: Option<CriterionStats>,
    pub gp_norm: Option<CriterionStats>,
    pub f_gap: Option<CriterionStats>,
    pub grad_l1_sq: Option<CriterionStats>,
    pub nnz: Option<CriterionStats>,
    pub lambda_min: Option<CriterionStats>,
    /// Oracle calls summed over successful runs.
    pub total_calls: u64,
    /// Informational only; never an acceptance gate.
    pub wall_time_s: f64,
}

impl SummaryRow {
    fn csv_row(&self) -> String {
        let stat = |s: &Option<CriterionStats>| match s {
            Some(v) => format!("{},{}", v.median, v.iqr),
            None => ",".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.algorithm,
            self.dimension,
            self.n_iters,
            self.seed_count,
            self.failures,
            stat(&self.fw_gap),
            stat(&self.gp_norm),
            stat(&self.f_gap),
            stat(&self.grad_l1_sq),
            stat(&self.nnz),
            stat(&self.lambda_min),
            self.total_calls,
            self.wall_time_s,
        )
    }
}

/// One failed run, kept so the experiment can continue.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub n_iters: usize,
    pub seed: u64,
    pub message: String,
}

/// What [`run_experiment`] wrote and where.
#[derive(Debug)]
pub struct ExperimentReport {
    pub summary_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<RunFailure>,
}

/// Sample median (average of middle pair for even counts).
pub fn median_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Interquartile range via medians of the lower and upper halves (the middle
/// element is excluded when the count is odd). Zero for fewer than two
/// values.
pub fn iqr_of(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("iqr of NaN"));
    let lower = median_of(&sorted[..n / 2]).unwrap();
    let upper = median_of(&sorted[n.div_ceil(2)..]).unwrap();
    upper - lower
}

fn stats_of(values: &[f64]) -> Option<CriterionStats> {
    median_of(values).map(|median| CriterionStats { median, iqr: iqr_of(values) })
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

struct RunOutcome {
    n_iters: usize,
    seed: u64,
    wall_time_s: f64,
    result: Result<(PathBuf, RunRecord)>,
}

/// Executes every `(seed, N)` pair of `config`, writing trace CSVs and a
/// summary CSV under the output directory. Individual run failures are
/// recorded in the report (and the summary's `failures` column); config and
/// I/O errors abort.
pub fn run_experiment(
    config: &ExperimentConfig,
    options: &ExperimentOptions,
) -> Result<ExperimentReport> {
    config.validate()?;
    let problem = config.problem.build()?;
    let out_dir = options
        .out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| ZoError::config("output_dir: not set in config and no --out given"))?;
    fs::create_dir_all(&out_dir)?;

    let x0 = config.x0.as_ref().map(|v| Array1::from(v.clone()));
    let run_options = RunOptions { verify: options.verify };
    let tasks: Vec<(usize, u64)> = config
        .n_grid
        .iter()
        .flat_map(|&n| config.seeds.iter().map(move |&s| (n, s)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.unwrap_or(0))
        .build()
        .map_err(|e| ZoError::config(format!("jobs: {e}")))?;
    let outcomes: Vec<RunOutcome> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(n, seed)| {
                let started = Instant::now();
                let result = build_schedule(
                    &problem,
                    config.set.as_ref(),
                    &config.algorithm,
                    &config.schedule,
                    n,
                )
                .and_then(|schedule| {
                    let (_, record) = dispatch(
                        &problem,
                        config.set.as_ref(),
                        &config.algorithm,
                        &schedule,
                        x0.as_ref(),
                        seed,
                        &run_options,
                    )?;
                    let path = out_dir.join(format!("trace_N{n}_seed{seed}.csv"));
                    atomic_write(&path, record.trace_csv_string().as_bytes())?;
                    Ok((path, record))
                });
                RunOutcome { n_iters: n, seed, wall_time_s: started.elapsed().as_secs_f64(), result }
            })
            .collect()
    });

    let mut by_n: BTreeMap<usize, Vec<&RunOutcome>> = BTreeMap::new();
    for outcome in &outcomes {
        by_n.entry(outcome.n_iters).or_default().push(outcome);
    }
    let mut rows = Vec::new();
    let mut trace_paths = Vec::new();
    let mut failures = Vec::new();
    for (&n, group) in &by_n {
        let mut fw = Vec::new();
        let mut gp = Vec::new();
        let mut fg = Vec::new();
        let mut g1 = Vec::new();
        let mut nz = Vec::new();
        let mut lm = Vec::new();
        let mut total_calls = 0u64;
        let mut wall = 0.0;
        let mut ok = 0usize;
        let mut failed = 0usize;
        for outcome in group {
            wall += outcome.wall_time_s;
            match &outcome.result {
                Ok((path, record)) => {
                    ok += 1;
                    total_calls += record.oracle_calls();
                    trace_paths.push(path.clone());
                    if let Some(last) = record.final_row() {
                        if let Some(v) = last.fw_gap {
                            fw.push(v);
                        }
                        if let Some(v) = last.gp_norm {
                            gp.push(v);
                        }
                        if let Some(v) = last.f_gap {
                            fg.push(v);
                        }
                        if let Some(v) = last.grad_l1_sq {
                            g1.push(v);
                        }
                        if let Some(v) = last.nnz {
                            nz.push(v as f64);
                        }
                        if let Some(v) = last.lambda_min {
                            lm.push(v);
                        }
                    }
                }
                Err(e) => {
                    failed += 1;
                    failures.push(RunFailure {
                        n_iters: n,
                        seed: outcome.seed,
                        message: e.to_string(),
                    });
                }
            }
        }
        rows.push(SummaryRow {
            algorithm: config.algorithm.clone(),
            dimension: problem.dimension(),
            n_iters: n,
            seed_count: ok,
            failures: failed,
            fw_gap: stats_of(&fw),
            gp_norm: stats_of(&gp),
            f_gap: stats_of(&fg),
            grad_l1_sq: stats_of(&g1),
            nnz: stats_of(&nz),
            lambda_min: stats_of(&lm),
            total_calls,
            wall_time_s: wall,
        });
    }

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for row in &rows {
        summary.push_str(&row.csv_row());
        summary.push('\n');
    }
    let summary_path = out_dir.join("summary.csv");
    atomic_write(&summary_path, summary.as_bytes())?;
    trace_paths.sort();
    Ok(ExperimentReport { summary_path, trace_paths, rows, failures })
}

fn dispatch(
    problem: &ProblemSpec,
    set: Option<&ConstraintSet>,
    algorithm: &str,
    schedule: &BuiltSchedule,
    x0: Option<&Array1<f64>>,
    seed: u64,
    options: &RunOptions,
) -> Result<(DecisionVector, RunRecord)> {
    match (algorithm, schedule) {
        ("zscg_nonconvex" | "zscg_convex", BuiltSchedule::Zscg(s)) => {
            zscg(problem, set.unwrap(), s, seed, options)
        }
        ("zscg_accelerated", BuiltSchedule::Accelerated(s)) => {
            zscg_accelerated(problem, set.unwrap(), s, seed, options)
        }
        ("zsgd_inexact", BuiltSchedule::Inexact(s)) => {
            zsgd_inexact_nonconvex(problem, set.unwrap(), s, seed, options)
        }
        ("zsgd_highdim", BuiltSchedule::HighDim(s)) => zsgd(problem, s, seed, options),
        ("zsgd_truncated", BuiltSchedule::HighDim(s)) => zsgd_truncated(problem, s, seed, options),
        ("zscrn", BuiltSchedule::Cubic(p)) => {
            zscrn(problem, p, x0.map(|v| v.view()).as_ref(), seed, options)
        }
        _ => Err(ZoError::config(format!("algorithm: unknown '{algorithm}'"))),
    }
}

/// Log-log slope fit of one summary criterion against `N`.
#[derive(Debug, Clone, Serialize)]
pub struct TrendReport {
    pub criterion: String,
    pub slope: f64,
    /// Standard error of the fitted slope (residual-based).
    pub slope_std_error: f64,
    pub lo: f64,
    pub hi: f64,
    pub points_used: usize,
    pub points_excluded: usize,
    pub pass: bool,
}

/// Reads `(N, <criterion>_median)` pairs from a summary CSV.
pub fn read_summary_criterion(path: &Path, criterion: &str) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| ZoError::config("summary: empty file"))?;
    let columns: Vec<&str> = header.split(',').collect();
    let wanted = format!("{criterion}_median");
    let value_idx = columns.iter().position(|c| *c == wanted).ok_or_else(|| {
        let available: Vec<&str> = columns
            .iter()
            .filter_map(|c| c.strip_suffix("_median"))
            .collect();
        ZoError::config(format!(
            "criterion: unknown '{criterion}' (expected one of {})",
            available.join(", ")
        ))
    })?;
    let n_idx = columns
        .iter()
        .position(|c| *c == "N")
        .ok_or_else(|| ZoError::config("summary: missing N column"))?;
    let mut points = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let n: f64 = cells
            .get(n_idx)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| ZoError::config(format!("summary: bad N in row '{line}'")))?;
        match cells.get(value_idx) {
            Some(c) if !c.is_empty() => {
                let v: f64 = c.parse().map_err(|_| {
                    ZoError::config(format!("summary: bad {wanted} in row '{line}'"))
                })?;
                points.push((n, v));
            }
            _ => {}
        }
    }
    Ok(points)
}

/// Least-squares slope of `log(value)` against `log(N)`.
///
/// Nonpositive or non-finite values are excluded (they have no logarithm);
/// at least three usable points are required. Passes iff `lo <= slope <=
/// hi`.
pub fn trend_check(
    points: &[(f64, f64)],
    criterion: &str,
    lo: f64,
    hi: f64,
) -> Result<TrendReport> {
    if !(lo <= hi) {
        return Err(ZoError::config(format!("slope: empty range {lo}:{hi}")));
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(n, v)| n.is_finite() && n > 0.0 && v.is_finite() && v > 0.0)
        .collect();
    let excluded = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(ZoError::config(format!(
            "trend: need at least 3 usable (N, value) points, got {} ({excluded} excluded as nonpositive)",
            usable.len()
        )));
    }
    let m = usable.len() as f64;
    let xs: Vec<f64> = usable.iter().map(|&(n, _)| n.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|&(_, v)| v.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(ZoError::config("trend: all N values identical"));
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let slope_std_error = (ssr / (m - 2.0) / sxx).sqrt();
    Ok(TrendReport {
        criterion: criterion.to_string(),
        slope,
        slope_std_error,
        lo,
        hi,
        points_used: usable.len(),
        points_excluded: excluded,
        pass: lo <= slope && slope <= hi,
    })
}

/// One named estimator check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Monte-Carlo spot checks of the estimator layer: gradient and Hessian
/// unbiasedness (within 5 standard errors), the sup-norm moment bound, the
/// smoothed-value offset on a quadratic, and `1/m` variance scaling. `quick`
/// cuts sample counts roughly fivefold.
pub fn validate_estimators(quick: bool) -> Result<Vec<CheckResult>> {
    let samples = if quick { 20_000 } else { 100_000 };
    let mut results = Vec::new();

    // Test fixture shared by the gradient checks: diagonal quadratic, d=10.
    let d = 10;
    let diag = Array1::from_iter((1..=d).map(|i| 0.5 * i as f64));
    let a = ndarray::Array2::from_diag(&diag);
    let c = Array1::from_elem(d, 0.25);
    let problem = ProblemSpec::quadratic(a, c, 0.0, 2.0)?;
    let x = Array1::from_iter((0..d).map(|i| if i % 2 == 0 { 0.3 } else { -0.3 }));
    let grad_ref = reference_gradient(&problem, &x.view())?;

    {
        // Gradient unbiasedness: per-coordinate mean within 5 SE of the true
        // gradient (exactly the smoothed gradient for quadratics).
        let oracle = ZeroOrderOracle::new(&problem);
        let params = SmoothingParams::euclidean(0.01);
        let mut rng = SeededStream::new(101);
        let mut mean = Array1::<f64>::zeros(d);
        let mut m2 = Array1::<f64>::zeros(d);
        for i in 0..samples {
            let est = grad_two_point(&oracle, &x.view(), &params, &mut rng)?;
            let count = (i + 1) as f64;
            for j in 0..d {
                let delta = est.vector[j] - mean[j];
                mean[j] += delta / count;
                m2[j] += delta * (est.vector[j] - mean[j]);
            }
        }
        let n = samples as f64;
        let mut worst = 0.0f64;
        for j in 0..d {
            let se = (m2[j] / (n - 1.0) / n).sqrt().max(f64::MIN_POSITIVE);
            worst = worst.max((mean[j] - grad_ref[j]).abs() / se);
        }
        results.push(CheckResult {
            name: "gradient_identity",
            pass: worst <= 5.0,
            detail: format!("max coordinate z-score {worst:.2} (limit 5)"),
        });
    }

    {
        // Hessian unbiasedness: entrywise mean of single second-difference
        // samples within 5 SE of the true Hessian.
        let hd = 5;
        let ha = ndarray::Array2::from_diag(&Array1::from_iter((1..=hd).map(|i| i as f64)));
        let hx = Array1::from_elem(hd, 0.2);
        let hproblem = ProblemSpec::quadratic(ha.clone(), Array1::zeros(hd), 0.0, 2.0)?;
        let oracle = ZeroOrderOracle::new(&hproblem);
        let params = SmoothingParams::euclidean(0.05);
        let mut rng = SeededStream::new(102);
        let hsamples = samples / 2;
        let mut mean = ndarray::Array2::<f64>::zeros((hd, hd));
        let mut m2 = ndarray::Array2::<f64>::zeros((hd, hd));
        for i in 0..hsamples {
            let sample = hess_three_point(&oracle, &hx.view(), &params, &mut rng)?.materialize();
            let count = (i + 1) as f64;
            for r in 0..hd {
                for cidx in 0..hd {
                    let delta = sample[[r, cidx]] - mean[[r, cidx]];
                    mean[[r, cidx]] += delta / count;
                    m2[[r, cidx]] += delta * (sample[[r, cidx]] - mean[[r, cidx]]);
                }
            }
        }
        let n = hsamples as f64;
        let mut worst = 0.0f64;
        for r in 0..hd {
            for cidx in 0..hd {
                let se = (m2[[r, cidx]] / (n - 1.0) / n).sqrt().max(f64::MIN_POSITIVE);
                worst = worst.max((mean[[r, cidx]] - ha[[r, cidx]]).abs() / se);
            }
        }
        results.push(CheckResult {
            name: "hessian_identity",
            pass: worst <= 5.0,
            detail: format!("max entry z-score {worst:.2} (limit 5)"),
        });
    }

    {
        // E |u|_inf^k <= 2 (2 log d)^{k/2} for standard Gaussian u.
        let mut rng = SeededStream::new(103);
        let dim = 100usize;
        let mut pass = true;
        let mut detail = String::new();
        for k in [2u32, 4] {
            let mut sum = 0.0;
            for _ in 0..samples {
                let u = rng.gaussian_vec(dim);
                let inf = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                sum += inf.powi(k as i32);
            }
            let mean = sum / samples as f64;
            let bound = 2.0 * (2.0 * (dim as f64).ln()).powf(k as f64 / 2.0);
            pass &= mean <= bound;
            detail.push_str(&format!("k={k}: {mean:.3} vs {bound:.3}; "));
        }
        results.push(CheckResult {
            name: "linf_moment_bound",
            pass,
            detail: detail.trim_end_matches("; ").to_string(),
        });
    }

    {
        // Smoothed value of a quadratic sits nu^2 tr(A) / 2 above the value.
        let mut rng = SeededStream::new(104);
        let nu = 0.1;
        let est = smoothed_value_reference(&problem, &x.view(), nu, samples, &mut rng)?;
        let trace: f64 = (1..=d).map(|i| 0.5 * i as f64).sum();
        let value = crate::oracle::objective_value(&problem, &x.view())?;
        let expected = value + nu * nu * trace / 2.0;
        let z = (est.mean - expected).abs() / est.std_error.max(f64::MIN_POSITIVE);
        results.push(CheckResult {
            name: "smoothing_value_offset",
            pass: z <= 5.0,
            detail: format!("z-score {z:.2} (limit 5)"),
        });
    }

    {
        // Averaging m samples cuts squared error ~1/m: quadrupling m should
        // at least halve the mean squared deviation.
        let oracle = ZeroOrderOracle::new(&problem);
        let params = SmoothingParams::euclidean(0.01);
        let mut rng = SeededStream::new(105);
        let trials = if quick { 30 } else { 100 };
        let mut errs = [0.0f64; 2];
        for (slot, m) in [(0usize, 100usize), (1, 400)] {
            let mut total = 0.0;
            for _ in 0..trials {
                let est = grad_averaged(&oracle, &x.view(), &params, m, &mut rng)?;
                let diff = &est.vector - &grad_ref;
                total += diff.dot(&diff);
            }
            errs[slot] = total / trials as f64;
        }
        let ratio = errs[1] / errs[0];
        results.push(CheckResult {
            name: "variance_scaling",
            pass: ratio < 0.5,
            detail: format!("mse(m=400)/mse(m=100) = {ratio:.3} (limit 0.5, ideal 0.25)"),
        });
    }

    Ok(results)
}
