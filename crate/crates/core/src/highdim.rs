//! Single-sample zeroth-order gradient descent for high-dimensional sparse
//! problems, plain and truncated.
//!
//! Both methods take one two-point gradient sample per iteration (two oracle
//! calls) and rely on step sizes scaled by `log d` rather than `d`: under
//! gradient sparsity the squared l1 gradient norm decays at a rate that
//! degrades only poly-logarithmically with ambient dimension, with no
//! sparsity-aware operation in the plain method at all. The truncated
//! variant keeps iterates `s_hat`-sparse by hard-thresholding after every
//! step and returns the running average of the pre-step iterates.

use crate::cg_solvers::{OutputRule, RunOptions};
use crate::error::{Result, ZoError};
use crate::estimators::{grad_averaged, SmoothingParams};
use crate::oracle::{objective_value, reference_gradient, ProblemSpec, ZeroOrderOracle};
use crate::rng::SeededStream;
use crate::trace::{fill_standard_metrics, RunRecord, TraceCadence, TraceColumns, TraceRow};
use crate::DecisionVector;
use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

/// Iterates whose max-norm exceeds this abort the run with a divergence
/// error; single-sample steps under a mis-set `gamma` can blow up fast, and
/// failing loudly with the trace beats returning garbage.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// Schedule for [`zsgd`] and [`zsgd_truncated`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HighDimSchedule {
    /// Iteration count `N`.
    pub n_iters: usize,
    /// Constant step size.
    pub gamma: f64,
    /// Smoothing radius.
    pub nu: f64,
    /// Sparsity overestimate `s_hat` (must cover the true gradient
    /// sparsity for the guarantees; also the truncation width).
    pub sparsity_estimate: usize,
    /// Max-norm moment constant `C_hat` the step rules scale by.
    pub moment_constant: f64,
}

/// Default `C_hat`: the max-norm moment bound `E |u|_inf^k <= C (2 log d)^{k/2}`
/// holds for a universal constant; Monte Carlo estimates over the `d` and `k`
/// ranges used here stay below 2 with margin.
pub const DEFAULT_MOMENT_CONSTANT: f64 = 2.0;

impl HighDimSchedule {
    /// Step rule for nonconvex objectives:
    /// `gamma = min{1/(12 s_hat log d), sqrt(D0 L C / (2 N sigma^2))} / (2 L C log d)`,
    /// `nu = min{sqrt(2 sigma^2 / L), sqrt(D0 / N)} / sqrt(L C log d)`.
    ///
    /// `initial_gap` is a bound on `f(x_0) - f*` from the all-zero start;
    /// when omitted it is computed from the problem's known optimum. With
    /// `sigma = 0` the noise-guarding branches of the two `min`s are vacuous
    /// (the terms they control vanish), so the other branch is taken.
    pub fn theory_nonconvex(
        problem: &ProblemSpec,
        n_iters: usize,
        initial_gap: Option<f64>,
    ) -> Result<Self> {
        let (d, n, s_hat, c_hat) = Self::theory_common(problem, n_iters)?;
        let log_d = d.ln();
        let l = problem.lipschitz_grad().max(f64::MIN_POSITIVE);
        let sigma = problem.noise_std();
        let d0 = Self::resolve_gap(problem, initial_gap, "initial_gap")?;
        let gamma_branch = 1.0 / (12.0 * s_hat as f64 * log_d);
        let nu_branch = (d0 / n).sqrt();
        let (gamma_min, nu_min) = if sigma > 0.0 {
            (
                gamma_branch.min((d0 * l * c_hat / (2.0 * n * sigma * sigma)).sqrt()),
                (2.0 * sigma * sigma / l).sqrt().min(nu_branch),
            )
        } else {
            (gamma_branch, nu_branch)
        };
        Ok(HighDimSchedule {
            n_iters,
            gamma: gamma_min / (2.0 * l * c_hat * log_d),
            nu: nu_min / (l * c_hat * log_d).sqrt(),
            sparsity_estimate: problem.gradient_sparsity().max(1),
            moment_constant: c_hat,
        })
    }

    /// Step rule for convex objectives with sparse optima (the truncated
    /// method):
    /// `gamma = min{1/(12 L s_hat log d), sqrt(D_X0 C s_hat / (3 N sigma^2))} / (4 C s_hat log d)`,
    /// `nu = sqrt(log d) min{sigma / log d, sqrt(s_hat^2 D_X0 / N)}`.
    ///
    /// `initial_dist_sq` bounds the squared distance from the all-zero start
    /// to an optimum. The same `sigma = 0` branch rule applies; the `nu`
    /// bound's noise branch is additionally replaced since it would pin
    /// `nu` to zero.
    pub fn theory_convex_truncated(
        problem: &ProblemSpec,
        n_iters: usize,
        initial_dist_sq: Option<f64>,
    ) -> Result<Self> {
        let (d, n, s_hat, c_hat) = Self::theory_common(problem, n_iters)?;
        let log_d = d.ln();
        let l = problem.lipschitz_grad().max(f64::MIN_POSITIVE);
        let sigma = problem.noise_std();
        let dx0 = match initial_dist_sq {
            Some(v) if v.is_finite() && v > 0.0 => v,
            Some(_) => return Err(ZoError::contract("highdim: initial_dist_sq must be positive")),
            None => match problem.optimum_point() {
                Some(star) => star.dot(star).max(f64::MIN_POSITIVE),
                None => {
                    return Err(ZoError::contract(
                        "highdim: initial_dist_sq required when the optimum is unknown",
                    ))
                }
            },
        };
        let s = s_hat as f64;
        let gamma_branch = 1.0 / (12.0 * l * s * log_d);
        let nu_branch = (s * s * dx0 / n).sqrt();
        let (gamma_min, nu_min) = if sigma > 0.0 {
            (
                gamma_branch.min((dx0 * c_hat * s / (3.0 * n * sigma * sigma)).sqrt()),
                (sigma / log_d).min(nu_branch),
            )
        } else {
            (gamma_branch, nu_branch)
        };
        Ok(HighDimSchedule {
            n_iters,
            gamma: gamma_min / (4.0 * c_hat * s * log_d),
            nu: log_d.sqrt() * nu_min,
            sparsity_estimate: s_hat,
            moment_constant: c_hat,
        })
    }

    fn theory_common(problem: &ProblemSpec, n_iters: usize) -> Result<(f64, f64, usize, f64)> {
        if n_iters == 0 {
            return Err(ZoError::contract("highdim: n_iters must be positive"));
        }
        if problem.dimension() < 2 {
            return Err(ZoError::contract("highdim: step rules need dimension >= 2 (log d > 0)"));
        }
        let s_hat = problem.gradient_sparsity().max(1);
        Ok((problem.dimension() as f64, n_iters as f64, s_hat, DEFAULT_MOMENT_CONSTANT))
    }

    fn resolve_gap(problem: &ProblemSpec, given: Option<f64>, name: &str) -> Result<f64> {
        match given {
            Some(v) if v.is_finite() && v > 0.0 => Ok(v),
            Some(_) => Err(ZoError::contract(format!("highdim: {name} must be positive"))),
            None => {
                let f0 = objective_value(problem, &Array1::zeros(problem.dimension()).view())?;
                match problem.optimum_value() {
                    Some(f_star) => Ok((f0 - f_star).max(f64::MIN_POSITIVE)),
                    None => Err(ZoError::contract(format!(
                        "highdim: {name} required when the optimum is unknown"
                    ))),
                }
            }
        }
    }

    /// User-chosen step size and smoothing radius.
    pub fn custom(n_iters: usize, gamma: f64, nu: f64, sparsity_estimate: usize) -> Result<Self> {
        let s = HighDimSchedule {
            n_iters,
            gamma,
            nu,
            sparsity_estimate,
            moment_constant: DEFAULT_MOMENT_CONSTANT,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iters == 0 {
            return Err(ZoError::contract("highdim: n_iters must be positive"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(ZoError::contract("highdim: gamma must be finite and nonnegative"));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(ZoError::contract("highdim: nu must be positive"));
        }
        if self.sparsity_estimate == 0 {
            return Err(ZoError::contract("highdim: sparsity_estimate must be positive"));
        }
        Ok(())
    }
}

/// Keeps the `s_hat` largest-magnitude entries of `y` and zeroes the rest;
/// ties break toward the lowest index. The result is the closest point to
/// `y` among all `s_hat`-sparse vectors.
pub fn truncate_top_s(y: &ArrayView1<'_, f64>, s_hat: usize) -> Result<DecisionVector> {
    let d = y.len();
    if s_hat == 0 || s_hat > d {
        return Err(ZoError::contract(format!(
            "truncate_top_s: s_hat must lie in 1..={d}, got {s_hat}"
        )));
    }
    if s_hat == d {
        return Ok(y.to_owned());
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_unstable_by(|&i, &j| {
        y[j].abs().partial_cmp(&y[i].abs()).unwrap().then(i.cmp(&j))
    });
    let mut out = Array1::zeros(d);
    for &i in &order[..s_hat] {
        out[i] = y[i];
    }
    Ok(out)
}

struct HighDimRun {
    rows: Vec<TraceRow>,
    oracle_calls: u64,
}

fn log_highdim_row(
    rows: &mut Vec<TraceRow>,
    problem: &ProblemSpec,
    x: &Array1<f64>,
    k: u64,
    calls: u64,
    verify: bool,
) -> Result<()> {
    let mut row = TraceRow { k, calls, ..Default::default() };
    if verify {
        fill_standard_metrics(&mut row, problem, None, &x.view(), problem.lipschitz_grad())?;
        let grad = reference_gradient(problem, &x.view())?;
        let l1: f64 = grad.iter().map(|g| g.abs()).sum();
        row.grad_l1_sq = Some(l1 * l1);
        row.nnz = Some(x.iter().filter(|v| **v != 0.0).count() as u64);
    }
    rows.push(row);
    Ok(())
}

fn check_divergence(x: &Array1<f64>, k: usize, rows: &[TraceRow]) -> Result<()> {
    let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !norm.is_finite() || norm > DIVERGENCE_LIMIT {
        return Err(ZoError::Divergence { iteration: k, norm, trace: rows.to_vec() });
    }
    Ok(())
}

/// Single-sample zeroth-order gradient descent from the all-zero start.
///
/// `x_k = x_{k-1} - gamma G_nu(x_{k-1})` with one two-point sample per
/// iteration; returns `x_R` with `R` uniform over `{0, ..., N-1}` drawn from
/// a split substream before the loop.
pub fn zsgd(
    problem: &ProblemSpec,
    schedule: &HighDimSchedule,
    seed: u64,
    options: &RunOptions,
) -> Result<(DecisionVector, RunRecord)> {
    schedule.validate()?;
    let mut stream = SeededStream::new(seed);
    let mut output_stream = stream.split();
    let r = output_stream.uniform_index(0, schedule.n_iters - 1) as u64;

    let run = highdim_loop(problem, schedule, &mut stream, options, None, Some(r))?;
    let (record, output) = finish_record(
        "zsgd_highdim",
        problem,
        schedule,
        seed,
        run,
        Some(r),
        options,
    )?;
    Ok((output, record))
}

/// Truncated variant: `x_k = P_{s_hat}(x_{k-1} - gamma G_nu(x_{k-1}))`, every
/// iterate at most `s_hat`-sparse. Returns the running average of the
/// pre-step iterates `x_0, ..., x_{N-1}` rather than a sampled index.
pub fn zsgd_truncated(
    problem: &ProblemSpec,
    schedule: &HighDimSchedule,
    seed: u64,
    options: &RunOptions,
) -> Result<(DecisionVector, RunRecord)> {
    schedule.validate()?;
    if schedule.sparsity_estimate > problem.dimension() {
        return Err(ZoError::contract("highdim: sparsity_estimate exceeds dimension"));
    }
    let mut stream = SeededStream::new(seed);
    let run = highdim_loop(
        problem,
        schedule,
        &mut stream,
        options,
        Some(schedule.sparsity_estimate),
        None,
    )?;
    let (record, output) =
        finish_record("zsgd_truncated", problem, schedule, seed, run, None, options)?;
    Ok((output, record))
}

/// Shared iteration loop. `truncate` switches the thresholded update on;
/// `snapshot_at` is the sampled output index of the plain method. Returns
/// the rows plus either the snapshot (plain) or the running average
/// (truncated) through `HighDimRun`.
fn highdim_loop(
    problem: &ProblemSpec,
    schedule: &HighDimSchedule,
    stream: &mut SeededStream,
    options: &RunOptions,
    truncate: Option<usize>,
    snapshot_at: Option<u64>,
) -> Result<(HighDimRun, DecisionVector)> {
    let d = problem.dimension();
    let oracle = ZeroOrderOracle::new(problem);
    let params = SmoothingParams::euclidean(schedule.nu);
    let cadence = TraceCadence::new(schedule.n_iters as u64);

    let mut x: Array1<f64> = Array1::zeros(d);
    let mut result = x.clone();
    let mut running_sum: Array1<f64> = Array1::zeros(d);
    let mut rows = Vec::new();
    log_highdim_row(&mut rows, problem, &x, 0, 0, options.verify)?;

    for k in 1..=schedule.n_iters {
        if truncate.is_some() {
            running_sum += &x;
        }
        let est = grad_averaged(&oracle, &x.view(), &params, 1, stream)?;
        x.scaled_add(-schedule.gamma, &est.vector);
        if let Some(s_hat) = truncate {
            x = truncate_top_s(&x.view(), s_hat)?;
        }
        check_divergence(&x, k, &rows)?;
        if snapshot_at == Some(k as u64) {
            result.assign(&x);
        }
        if cadence.should_record(k as u64) {
            log_highdim_row(&mut rows, problem, &x, k as u64, oracle.calls(), options.verify)?;
        }
    }

    if truncate.is_some() {
        result = running_sum / schedule.n_iters as f64;
    }
    Ok((HighDimRun { rows, oracle_calls: oracle.calls() }, result))
}

fn finish_record(
    algorithm: &str,
    problem: &ProblemSpec,
    schedule: &HighDimSchedule,
    seed: u64,
    run: (HighDimRun, DecisionVector),
    output_index: Option<u64>,
    options: &RunOptions,
) -> Result<(RunRecord, DecisionVector)> {
    let (mut run, output) = run;
    // Final row describes the returned point; k echoes the sampled index for
    // the plain method and N for the averaged one.
    let k = output_index.unwrap_or(schedule.n_iters as u64);
    log_highdim_row(&mut run.rows, problem, &output, k, run.oracle_calls, options.verify)?;
    let record = RunRecord {
        algorithm: algorithm.into(),
        seed,
        schedule: serde_json::to_value(schedule)?,
        columns: TraceColumns::HighDim,
        rows: run.rows,
        output_index,
        gradient_oracle_calls: run.oracle_calls,
        hessian_oracle_calls: 0,
        lmo_calls: 0,
        output_point: output.to_vec(),
    };
    Ok((record, output))
}

/// The plain method's output rule, exposed for config handling.
pub fn zsgd_output_rule() -> OutputRule {
    OutputRule::UniformShifted
}
