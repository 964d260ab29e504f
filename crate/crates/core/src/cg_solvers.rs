//! Conditional-gradient-family solvers over a constraint set.
//!
//! Three algorithms share the two-point averaged gradient estimator:
//!
//! * [`zscg`]: projection-free steps toward the linear minimizer, with a
//!   randomized output index;
//! * [`zscg_accelerated`]: momentum iterates whose proximal subproblems are
//!   solved inexactly by [`crate::constraints::icg`];
//! * [`zsgd_inexact_nonconvex`]: proximal gradient steps, each prox solved
//!   inexactly by ICG, output uniform over all iterates.
//!
//! Each schedule type offers a `theory_*` constructor that reproduces the
//! step, batch, and smoothing rules under which the convergence guarantees
//! are stated, and a `custom` constructor for desk-scale budgets where those
//! rules are too expensive. Theory batch sizes grow like `d * N` per
//! iteration, so oracle-call totals scale like `d * N^2`; size `N`
//! accordingly.

use crate::constraints::{icg, lmo, ConstraintSet, IcgParams};
use crate::error::{Result, ZoError};
use crate::estimators::{grad_averaged, SmoothingParams};
use crate::oracle::{ProblemSpec, ZeroOrderOracle};
use crate::rng::SeededStream;
use crate::trace::{fill_standard_metrics, RunRecord, TraceCadence, TraceColumns, TraceRow};
use crate::DecisionVector;
use ndarray::Array1;
use serde::{Deserialize, Serialize};

/// How a solver picks its returned iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputRule {
    /// Uniform over iterates `1..=N`.
    UniformIterates,
    /// Uniform over `0..=N-1` (the pre-step points).
    UniformShifted,
    /// Weighted by the step-product distribution of the convex analysis.
    GammaWeighted,
    /// Deterministic final iterate.
    Final,
}

/// Run-wide switches shared by all solvers.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Compute reference metrics (Frank-Wolfe gap, gradient mapping norm,
    /// objective gap) at logged iterations. Metrics read the noiseless
    /// reference objective and never touch the oracle counter or solver
    /// randomness, so disabling them changes nothing but the trace contents.
    pub verify: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { verify: true }
    }
}

fn check_pair(problem: &ProblemSpec, set: &ConstraintSet) -> Result<()> {
    if problem.dimension() != set.dimension() {
        return Err(ZoError::DimensionMismatch {
            expected: problem.dimension(),
            got: set.dimension(),
        });
    }
    Ok(())
}

/// `max(sqrt(B^2 + sigma^2) / L, 1)` with `B` the gradient-norm bound over
/// the set: the constant the theory schedules scale their batches by.
pub fn default_bound_constant(problem: &ProblemSpec, set: &ConstraintSet) -> f64 {
    let b = problem.gradient_norm_bound(set.max_point_norm());
    let sigma = problem.noise_std();
    let l = problem.lipschitz_grad().max(f64::MIN_POSITIVE);
    ((b * b + sigma * sigma).sqrt() / l).max(1.0)
}

/// Schedule for [`zscg`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZscgSchedule {
    /// Iteration count `N`.
    pub n_iters: usize,
    /// Smoothing radius.
    pub nu: f64,
    /// Constant step size, or `None` for the convex rule `6/(k+5)`.
    pub alpha: Option<f64>,
    /// Per-iteration gradient batch size.
    pub batch: u64,
    /// Output selection.
    pub output: OutputRule,
}

impl ZscgSchedule {
    /// Nonconvex theory rule: `alpha = 1/sqrt(N)`, batch `2 B (d+5) N`
    /// (rounded up), `nu = sqrt(2B / (N (d+3)^3))`, output uniform over
    /// `1..=N`.
    pub fn theory_nonconvex(problem: &ProblemSpec, set: &ConstraintSet, n_iters: usize) -> Result<Self> {
        check_pair(problem, set)?;
        if n_iters == 0 {
            return Err(ZoError::contract("zscg: n_iters must be positive"));
        }
        let d = problem.dimension() as f64;
        let n = n_iters as f64;
        let b = default_bound_constant(problem, set);
        Ok(ZscgSchedule {
            n_iters,
            nu: (2.0 * b / (n * (d + 3.0).powi(3))).sqrt(),
            alpha: Some(1.0 / n.sqrt()),
            batch: (2.0 * b * (d + 5.0) * n).ceil() as u64,
            output: OutputRule::UniformIterates,
        })
    }

    /// Convex theory rule: `alpha_k = 6/(k+5)`, batch `2 B (d+5) N^2`
    /// (rounded up), `nu = sqrt(2B / (N^2 (d+3)^3))`, weighted output.
    pub fn theory_convex(problem: &ProblemSpec, set: &ConstraintSet, n_iters: usize) -> Result<Self> {
        check_pair(problem, set)?;
        if n_iters == 0 {
            return Err(ZoError::contract("zscg: n_iters must be positive"));
        }
        let d = problem.dimension() as f64;
        let n = n_iters as f64;
        let b = default_bound_constant(problem, set);
        Ok(ZscgSchedule {
            n_iters,
            nu: (2.0 * b / (n * n * (d + 3.0).powi(3))).sqrt(),
            alpha: None,
            batch: (2.0 * b * (d + 5.0) * n * n).ceil() as u64,
            output: OutputRule::GammaWeighted,
        })
    }

    /// User-chosen step, batch, and smoothing radius.
    pub fn custom(n_iters: usize, nu: f64, alpha: f64, batch: u64, output: OutputRule) -> Result<Self> {
        let s = ZscgSchedule { n_iters, nu, alpha: Some(alpha), batch, output };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iters == 0 {
            return Err(ZoError::contract("zscg: n_iters must be positive"));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(ZoError::contract("zscg: nu must be positive"));
        }
        if let Some(a) = self.alpha {
            if !(a.is_finite() && a > 0.0 && a <= 1.0) {
                return Err(ZoError::contract("zscg: alpha must lie in (0, 1]"));
            }
        }
        if self.batch == 0 {
            return Err(ZoError::contract("zscg: batch must be positive"));
        }
        if self.output == OutputRule::UniformShifted {
            return Err(ZoError::contract("zscg: output rule must cover iterates 1..=N"));
        }
        Ok(())
    }

    /// Step size at iteration `k` (1-indexed).
    pub fn alpha(&self, k: usize) -> f64 {
        match self.alpha {
            Some(a) => a,
            None => 6.0 / (k as f64 + 5.0),
        }
    }

    /// Gradient batch size at iteration `k`.
    pub fn batch_size(&self, _k: usize) -> u64 {
        self.batch
    }

    /// Step products `prod_{i<=k} (1 - alpha_i / 2)` for `k = 0..=N`.
    pub fn step_products(&self) -> Vec<f64> {
        let mut g = Vec::with_capacity(self.n_iters + 1);
        g.push(1.0);
        for k in 1..=self.n_iters {
            g.push(g[k - 1] * (1.0 - self.alpha(k) / 2.0));
        }
        g
    }

    /// Output distribution over iterations `1..=N`: index `k-1` holds
    /// `P(R = k) = alpha_k Gamma_N / (2 Gamma_k (1 - Gamma_N))` with
    /// `Gamma_k` the step products. Sums to one by telescoping.
    pub fn output_weights(&self) -> Vec<f64> {
        let g = self.step_products();
        let gn = g[self.n_iters];
        let scale = gn / (1.0 - gn);
        (1..=self.n_iters)
            .map(|k| scale * self.alpha(k) / (2.0 * g[k]))
            .collect()
    }
}

/// Draws the output index from the rule's distribution. Uses a dedicated
/// substream so the choice of rule never perturbs the trajectory.
fn draw_output_index(
    rule: OutputRule,
    n_iters: usize,
    weights: impl FnOnce() -> Vec<f64>,
    stream: &mut SeededStream,
) -> u64 {
    match rule {
        OutputRule::Final => n_iters as u64,
        OutputRule::UniformIterates => stream.uniform_index(1, n_iters) as u64,
        OutputRule::UniformShifted => stream.uniform_index(0, n_iters - 1) as u64,
        OutputRule::GammaWeighted => 1 + stream.pick_weighted(&weights()) as u64,
    }
}

/// Conditional-gradient method with averaged two-point gradient estimates.
///
/// Per iteration: estimate the gradient at `z_{k-1}` with `batch` two-point
/// samples, take the linear minimizer `x_k` of the estimate over the set,
/// and move `z_k = (1 - alpha_k) z_{k-1} + alpha_k x_k`. Returns `z_R` with
/// `R` drawn from the schedule's output rule before the loop starts (from a
/// split substream, so the trajectory is identical across output rules).
pub fn zscg(
    problem: &ProblemSpec,
    set: &ConstraintSet,
    schedule: &ZscgSchedule,
    seed: u64,
    options: &RunOptions,
) -> Result<(DecisionVector, RunRecord)> {
    check_pair(problem, set)?;
    schedule.validate()?;
    let mut stream = SeededStream::new(seed);
    let mut output_stream = stream.split();
    let r = draw_output_index(
        schedule.output,
        schedule.n_iters,
        || schedule.output_weights(),
        &mut output_stream,
    );

    let oracle = ZeroOrderOracle::new(problem);
    let params = SmoothingParams::euclidean(schedule.nu);
    let cadence = TraceCadence::new(schedule.n_iters as u64);
    let gamma_metric = problem.lipschitz_grad().max(f64::MIN_POSITIVE);

    let mut z = set.default_start();
    let mut snapshot = z.clone();
    let mut lmo_calls = 0u64;
    let mut rows = Vec::new();
    let log = |k: u64, z: &Array1<f64>, calls: u64, lmo_calls: u64| -> Result<TraceRow> {
        let mut row = TraceRow { k, calls, lmo_calls: Some(lmo_calls), ..Default::default() };
        if options.verify {
            fill_standard_metrics(&mut row, problem, Some(set), &z.view(), gamma_metric)?;
        }
        Ok(row)
    };
    rows.push(log(0, &z, 0, 0)?);

    for k in 1..=schedule.n_iters {
        let est = grad_averaged(&oracle, &z.view(), &params, schedule.batch_size(k) as usize, &mut stream)?;
        let vertex = lmo(set, &est.vector.view())?;
        lmo_calls += 1;
        let alpha = schedule.alpha(k);
        z.zip_mut_with(&vertex, |zi, vi| *zi = (1.0 - alpha) * *zi + alpha * vi);
        debug_assert!(set.contains(&z.view(), 1e-9), "iterate left the set at k={k}");
        if k as u64 == r {
            snapshot.assign(&z);
        }
        if cadence.should_record(k as u64) {
            rows.push(log(k as u64, &z, oracle.calls(), lmo_calls)?);
        }
    }

    let output = snapshot;
    rows.push(log(r, &output, oracle.calls(), lmo_calls)?);
    let record = RunRecord {
        algorithm: "zscg".into(),
        seed,
        schedule: serde_json::to_value(schedule)?,
        columns: TraceColumns::Standard,
        rows,
        output_index: Some(r),
        gradient_oracle_calls: oracle.calls(),
        hessian_oracle_calls: 0,
        lmo_calls,
        output_point: output.to_vec(),
    };
    Ok((output, record))
}

/// Schedule for [`zscg_accelerated`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcceleratedSchedule {
    /// Iteration count `N`.
    pub n_iters: usize,
    /// Smoothing radius.
    pub nu: f64,
    /// Gradient Lipschitz constant the step rules scale by.
    pub lipschitz_grad: f64,
    /// Bound on the squared distance from the start to an optimum.
    pub initial_gap_sq: f64,
    /// Batch scale: batch at `k` is `ceil(k (k+1) batch_scale)`.
    pub batch_scale: f64,
    /// Cap on inner conditional-gradient iterations per prox solve.
    pub max_inner_iters: usize,
}

impl AcceleratedSchedule {
    /// Theory rule: `alpha_k = 2/(k+1)`, `gamma_k = 4L/k`,
    /// `mu_k = L D0 / (k N)`, batch `k (k+1) max{(d+5) B N, d+3} / D0`,
    /// `nu = max{1/(d+3), sqrt(D0 / (d (N+1)))} / sqrt(2N)`.
    ///
    /// `initial_gap_sq` defaults to the squared distance from the default
    /// start to the known optimum when the problem has one, else the squared
    /// set diameter.
    pub fn theory(
        problem: &ProblemSpec,
        set: &ConstraintSet,
        n_iters: usize,
        initial_gap_sq: Option<f64>,
    ) -> Result<Self> {
        check_pair(problem, set)?;
        if n_iters == 0 {
            return Err(ZoError::contract("accelerated: n_iters must be positive"));
        }
        let d = problem.dimension() as f64;
        let n = n_iters as f64;
        let b = default_bound_constant(problem, set);
        let d0 = match initial_gap_sq {
            Some(v) if v.is_finite() && v > 0.0 => v,
            Some(_) => return Err(ZoError::contract("accelerated: initial_gap_sq must be positive")),
            None => match problem.optimum_point() {
                Some(star) => {
                    let start = set.default_start();
                    let diff = &start - star;
                    let dist = diff.dot(&diff);
                    if dist > 0.0 { dist } else { set.diameter().powi(2) }
                }
                None => set.diameter().powi(2),
            },
        };
        let batch_scale = ((d + 5.0) * b * n).max(d + 3.0) / d0;
        let nu = (1.0 / (d + 3.0)).max((d0 / (d * (n + 1.0))).sqrt()) / (2.0 * n).sqrt();
        Ok(AcceleratedSchedule {
            n_iters,
            nu,
            lipschitz_grad: problem.lipschitz_grad(),
            initial_gap_sq: d0,
            batch_scale,
            max_inner_iters: 200_000,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iters == 0 {
            return Err(ZoError::contract("accelerated: n_iters must be positive"));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(ZoError::contract("accelerated: nu must be positive"));
        }
        if !(self.lipschitz_grad.is_finite() && self.lipschitz_grad > 0.0) {
            return Err(ZoError::contract("accelerated: lipschitz_grad must be positive"));
        }
        if !(self.initial_gap_sq.is_finite() && self.initial_gap_sq > 0.0) {
            return Err(ZoError::contract("accelerated: initial_gap_sq must be positive"));
        }
        if !(self.batch_scale.is_finite() && self.batch_scale > 0.0) {
            return Err(ZoError::contract("accelerated: batch_scale must be positive"));
        }
        Ok(())
    }

    pub fn alpha(&self, k: usize) -> f64 {
        2.0 / (k as f64 + 1.0)
    }

    pub fn gamma(&self, k: usize) -> f64 {
        4.0 * self.lipschitz_grad / k as f64
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.lipschitz_grad * self.initial_gap_sq / (k as f64 * self.n_iters as f64)
    }

    pub fn batch_size(&self, k: usize) -> u64 {
        let k = k as f64;
        (k * (k + 1.0) * self.batch_scale).ceil().max(1.0) as u64
    }
}

/// Accelerated conditional-gradient method with inexact prox steps.
///
/// Per iteration: form the momentum point `w_k = (1-alpha_k) z_{k-1} +
/// alpha_k x_{k-1}`, estimate the gradient there, move `x_k` by an ICG prox
/// step from `x_{k-1}`, and average `z_k = (1-alpha_k) z_{k-1} + alpha_k
/// x_k`. Returns the final `z_N` deterministically.
pub fn zscg_accelerated(
    problem: &ProblemSpec,
    set: &ConstraintSet,
    schedule: &AcceleratedSchedule,
    seed: u64,
    options: &RunOptions,
) -> Result<(DecisionVector, RunRecord)> {
    check_pair(problem, set)?;
    schedule.validate()?;
    let mut stream = SeededStream::new(seed);
    let oracle = ZeroOrderOracle::new(problem);
    let params = SmoothingParams::euclidean(schedule.nu);
    let cadence = TraceCadence::new(schedule.n_iters as u64);
    let gamma_metric = schedule.lipschitz_grad;

    let mut z = set.default_start();
    let mut x = z.clone();
    let mut lmo_calls = 0u64;
    let mut rows = Vec::new();
    let log = |k: u64, z: &Array1<f64>, calls: u64, lmo_calls: u64| -> Result<TraceRow> {
        let mut row = TraceRow { k, calls, lmo_calls: Some(lmo_calls), ..Default::default() };
        if options.verify {
            fill_standard_metrics(&mut row, problem, Some(set), &z.view(), gamma_metric)?;
        }
        Ok(row)
    };
    rows.push(log(0, &z, 0, 0)?);

    for k in 1..=schedule.n_iters {
        let alpha = schedule.alpha(k);
        let w = Array1::from_iter(
            z.iter().zip(x.iter()).map(|(zi, xi)| (1.0 - alpha) * zi + alpha * xi),
        );
        let est = grad_averaged(&oracle, &w.view(), &params, schedule.batch_size(k) as usize, &mut stream)?;
        let icg_params = IcgParams::new(set, schedule.gamma(k), schedule.mu(k))?
            .with_max_iters(schedule.max_inner_iters);
        let inner = icg(set, &x.view(), &est.vector.view(), &icg_params).map_err(|e| match e {
            ZoError::IterationBudget { iterations, residual, best, .. } => ZoError::IterationBudget {
                context: "accelerated prox step",
                iterations,
                residual,
                best,
            },
            other => other,
        })?;
        lmo_calls += inner.lmo_calls;
        x = inner.point;
        z.zip_mut_with(&x, |zi, xi| *zi = (1.0 - alpha) * *zi + alpha * xi);
        debug_assert!(set.contains(&z.view(), 1e-9), "iterate left the set at k={k}");
        if cadence.should_record(k as u64) {
            rows.push(log(k as u64, &z, oracle.calls(), lmo_calls)?);
        }
    }

    let r = schedule.n_iters as u64;
    rows.push(log(r, &z, oracle.calls(), lmo_calls)?);
    let record = RunRecord {
        algorithm: "zscg_accelerated".into(),
        seed,
        schedule: serde_json::to_value(schedule)?,
        columns: TraceColumns::Standard,
        rows,
        output_index: None,
        gradient_oracle_calls: oracle.calls(),
        hessian_oracle_calls: 0,
        lmo_calls,
        output_point: z.to_vec(),
    };
    Ok((z, record))
}

/// Schedule for [`zsgd_inexact_nonconvex`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InexactZsgdSchedule {
    /// Iteration count `N`.
    pub n_iters: usize,
    /// Smoothing radius.
    pub nu: f64,
    /// Prox curvature (constant across iterations).
    pub gamma: f64,
    /// ICG inexactness tolerance (constant across iterations).
    pub mu: f64,
    /// Gradient batch size per iteration.
    pub batch: u64,
    /// Cap on inner conditional-gradient iterations per prox solve.
    pub max_inner_iters: usize,
}

impl InexactZsgdSchedule {
    /// Theory rule: `gamma = 2L`, `mu = 1/(4N)`, batch `6 (d+5) N`,
    /// `nu = sqrt(1 / (2 N (d+3)^3))`.
    pub fn theory(problem: &ProblemSpec, set: &ConstraintSet, n_iters: usize) -> Result<Self> {
        check_pair(problem, set)?;
        if n_iters == 0 {
            return Err(ZoError::contract("inexact zsgd: n_iters must be positive"));
        }
        let d = problem.dimension() as f64;
        let n = n_iters as f64;
        Ok(InexactZsgdSchedule {
            n_iters,
            nu: (1.0 / (2.0 * n * (d + 3.0).powi(3))).sqrt(),
            gamma: 2.0 * problem.lipschitz_grad(),
            mu: 1.0 / (4.0 * n),
            batch: (6.0 * (d + 5.0) * n).ceil() as u64,
            max_inner_iters: 200_000,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iters == 0 {
            return Err(ZoError::contract("inexact zsgd: n_iters must be positive"));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(ZoError::contract("inexact zsgd: nu must be positive"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(ZoError::contract("inexact zsgd: gamma must be positive"));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(ZoError::contract("inexact zsgd: mu must be nonnegative"));
        }
        if self.batch == 0 {
            return Err(ZoError::contract("inexact zsgd: batch must be positive"));
        }
        Ok(())
    }
}

/// Proximal-point method with inexact conditional-gradient prox solves.
///
/// Per iteration: estimate the gradient at `x_{k-1}`, then move to the ICG
/// solution of the prox subproblem at curvature `gamma` and slack `mu`.
/// Returns `x_R` with `R` uniform over `{0, ..., N-1}`, so the start point
/// itself is a possible output.
pub fn zsgd_inexact_nonconvex(
    problem: &ProblemSpec,
    set: &ConstraintSet,
    schedule: &InexactZsgdSchedule,
    seed: u64,
    options: &RunOptions,
) -> Result<(DecisionVector, RunRecord)> {
    check_pair(problem, set)?;
    schedule.validate()?;
    let mut stream = SeededStream::new(seed);
    let mut output_stream = stream.split();
    let r = draw_output_index(
        OutputRule::UniformShifted,
        schedule.n_iters,
        Vec::new,
        &mut output_stream,
    );

    let oracle = ZeroOrderOracle::new(problem);
    let params = SmoothingParams::euclidean(schedule.nu);
    let cadence = TraceCadence::new(schedule.n_iters as u64);
    let gamma = schedule.gamma;

    let mut x = set.default_start();
    let mut snapshot = x.clone();
    let mut lmo_calls = 0u64;
    let mut rows = Vec::new();
    let log = |k: u64, x: &Array1<f64>, calls: u64, lmo_calls: u64| -> Result<TraceRow> {
        let mut row = TraceRow { k, calls, lmo_calls: Some(lmo_calls), ..Default::default() };
        if options.verify {
            fill_standard_metrics(&mut row, problem, Some(set), &x.view(), gamma)?;
        }
        Ok(row)
    };
    rows.push(log(0, &x, 0, 0)?);

    let icg_params = IcgParams { gamma, mu: schedule.mu, max_iters: schedule.max_inner_iters };
    for k in 1..=schedule.n_iters {
        let est = grad_averaged(&oracle, &x.view(), &params, schedule.batch as usize, &mut stream)?;
        let inner = icg(set, &x.view(), &est.vector.view(), &icg_params)?;
        lmo_calls += inner.lmo_calls;
        x = inner.point;
        debug_assert!(set.contains(&x.view(), 1e-9), "iterate left the set at k={k}");
        if k as u64 == r {
            snapshot.assign(&x);
        }
        if cadence.should_record(k as u64) {
            rows.push(log(k as u64, &x, oracle.calls(), lmo_calls)?);
        }
    }

    let output = snapshot;
    rows.push(log(r, &output, oracle.calls(), lmo_calls)?);
    let record = RunRecord {
        algorithm: "zsgd_inexact_nonconvex".into(),
        seed,
        schedule: serde_json::to_value(schedule)?,
        columns: TraceColumns::Standard,
        rows,
        output_index: Some(r),
        gradient_oracle_calls: oracle.calls(),
        hessian_oracle_calls: 0,
        lmo_calls,
        output_point: output.to_vec(),
    };
    Ok((output, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn ball_quadratic(d: usize) -> (ProblemSpec, ConstraintSet) {
        let a = Array2::eye(d);
        let mut c = Array1::zeros(d);
        c[0] = -2.0;
        let problem = ProblemSpec::quadratic(a, c, 0.0, 2.0).unwrap();
        let set = ConstraintSet::l1_ball(d, 1.0).unwrap();
        (problem, set)
    }

    #[test]
    fn single_step_with_unit_alpha_outputs_a_vertex() {
        let (problem, set) = ball_quadratic(4);
        let schedule = ZscgSchedule::custom(1, 1e-4, 1.0, 64, OutputRule::Final).unwrap();
        let (out, record) = zscg(&problem, &set, &schedule, 3, &RunOptions::default()).unwrap();
        // z_1 = lmo of the gradient estimate: a vertex of the l1 ball.
        let nnz = out.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nnz, 1);
        assert_eq!(record.lmo_calls, 1);
        assert_eq!(record.gradient_oracle_calls, 128);
    }

    #[test]
    fn theory_nonconvex_schedule_matches_closed_forms() {
        let (problem, set) = ball_quadratic(6);
        let n = 49;
        let s = ZscgSchedule::theory_nonconvex(&problem, &set, n).unwrap();
        let b = default_bound_constant(&problem, &set);
        let d = 6.0;
        assert_eq!(s.alpha(1), 1.0 / 7.0);
        assert_eq!(s.batch, (2.0 * b * (d + 5.0) * 49.0).ceil() as u64);
        assert!((s.nu - (2.0 * b / (49.0 * 9.0f64.powi(3))).sqrt()).abs() < 1e-15);
        assert_eq!(s.output, OutputRule::UniformIterates);
    }

    #[test]
    fn convex_step_products_match_closed_form() {
        let (problem, set) = ball_quadratic(3);
        let s = ZscgSchedule::theory_convex(&problem, &set, 30).unwrap();
        let g = s.step_products();
        for (k, gk) in g.iter().enumerate() {
            let k = k as f64;
            let closed = 60.0 / ((k + 3.0) * (k + 4.0) * (k + 5.0));
            assert!((gk - closed).abs() <= 1e-12 * closed, "k={k}: {gk} vs {closed}");
        }
        let w = s.output_weights();
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|p| *p > 0.0));
    }

    #[test]
    fn zscg_iterates_stay_feasible_and_trace_is_complete() {
        let (problem, set) = ball_quadratic(5);
        let schedule =
            ZscgSchedule::custom(40, 1e-3, 0.2, 8, OutputRule::UniformIterates).unwrap();
        let (out, record) = zscg(&problem, &set, &schedule, 11, &RunOptions::default()).unwrap();
        assert!(set.contains(&out.view(), 1e-9));
        // k=0 row, 40 iteration rows, one output row.
        assert_eq!(record.rows.len(), 42);
        assert_eq!(record.rows[0].k, 0);
        let final_row = record.final_row().unwrap();
        assert_eq!(Some(final_row.k), record.output_index);
        assert_eq!(record.gradient_oracle_calls, 40 * 2 * 8);
        for row in &record.rows {
            assert!(row.fw_gap.unwrap() >= -1e-12);
        }
    }

    #[test]
    fn identical_seeds_reproduce_records_exactly() {
        let (problem, set) = ball_quadratic(4);
        let schedule =
            ZscgSchedule::custom(10, 1e-3, 0.3, 4, OutputRule::UniformIterates).unwrap();
        let opts = RunOptions::default();
        let a = zscg(&problem, &set, &schedule, 5, &opts).unwrap();
        let b = zscg(&problem, &set, &schedule, 5, &opts).unwrap();
        assert_eq!(
            serde_json::to_string(&a.1).unwrap(),
            serde_json::to_string(&b.1).unwrap()
        );
    }

    #[test]
    fn verify_flag_changes_metrics_only() {
        let (problem, set) = ball_quadratic(4);
        let schedule =
            ZscgSchedule::custom(12, 1e-3, 0.3, 4, OutputRule::UniformIterates).unwrap();
        let on = zscg(&problem, &set, &schedule, 9, &RunOptions { verify: true }).unwrap();
        let off = zscg(&problem, &set, &schedule, 9, &RunOptions { verify: false }).unwrap();
        assert_eq!(on.0, off.0);
        assert_eq!(on.1.gradient_oracle_calls, off.1.gradient_oracle_calls);
        assert_eq!(on.1.output_index, off.1.output_index);
        assert!(off.1.rows.iter().all(|r| r.fw_gap.is_none()));
        assert!(on.1.rows.iter().any(|r| r.fw_gap.is_some()));
    }

    #[test]
    fn accelerated_returns_final_iterate_and_counts_calls() {
        let (problem, set) = ball_quadratic(4);
        let schedule = AcceleratedSchedule {
            n_iters: 15,
            nu: 1e-3,
            lipschitz_grad: problem.lipschitz_grad(),
            initial_gap_sq: 1.0,
            batch_scale: 0.5,
            max_inner_iters: 10_000,
        };
        let (out, record) =
            zscg_accelerated(&problem, &set, &schedule, 2, &RunOptions::default()).unwrap();
        assert!(set.contains(&out.view(), 1e-9));
        assert_eq!(record.output_index, None);
        let expected: u64 = (1..=15).map(|k| 2 * schedule.batch_size(k)).sum();
        assert_eq!(record.gradient_oracle_calls, expected);
        assert!(record.lmo_calls >= 15);
        assert_eq!(record.final_row().unwrap().k, 15);
    }

    #[test]
    fn huge_mu_keeps_accelerated_feasible() {
        let (problem, set) = ball_quadratic(3);
        let schedule = AcceleratedSchedule {
            n_iters: 10,
            nu: 1e-3,
            lipschitz_grad: problem.lipschitz_grad(),
            initial_gap_sq: 1e12,
            batch_scale: 0.2,
            max_inner_iters: 100,
        };
        let (out, record) =
            zscg_accelerated(&problem, &set, &schedule, 4, &RunOptions::default()).unwrap();
        assert!(set.contains(&out.view(), 1e-9));
        for row in &record.rows {
            assert!(row.fw_gap.unwrap() >= -1e-12);
        }
    }

    #[test]
    fn inexact_zsgd_theory_schedule_and_output_support() {
        let (problem, set) = ball_quadratic(5);
        let s = InexactZsgdSchedule::theory(&problem, &set, 16).unwrap();
        assert_eq!(s.gamma, 2.0 * problem.lipschitz_grad());
        assert_eq!(s.mu, 1.0 / 64.0);
        assert_eq!(s.batch, 6 * 10 * 16);
        assert!((s.nu - (1.0f64 / (2.0 * 16.0 * 512.0)).sqrt()).abs() < 1e-15);

        let (out, record) =
            zsgd_inexact_nonconvex(&problem, &set, &s, 8, &RunOptions::default()).unwrap();
        assert!(set.contains(&out.view(), 1e-9));
        let r = record.output_index.unwrap();
        assert!(r < 16, "output index {r} must be in 0..N");
        assert_eq!(record.gradient_oracle_calls, 16 * 2 * s.batch);
    }

    #[test]
    fn inexact_zsgd_n1_can_return_start_point() {
        let (problem, set) = ball_quadratic(3);
        let mut s = InexactZsgdSchedule::theory(&problem, &set, 1).unwrap();
        s.batch = 4;
        let (out, record) =
            zsgd_inexact_nonconvex(&problem, &set, &s, 0, &RunOptions::default()).unwrap();
        // N=1: R is always 0, so the output is the start point.
        assert_eq!(record.output_index, Some(0));
        assert_eq!(out, set.default_start());
        assert_eq!(record.final_row().unwrap().k, 0);
    }

    #[test]
    fn linear_objective_over_box_converges_to_vertex() {
        // f = <c, x> with c = (1, -1): minimizing vertex of the box is (-1, 1).
        let problem = ProblemSpec::quadratic(Array2::zeros((2, 2)), array![1.0, -1.0], 0.0, 2.0)
            .unwrap();
        let set = ConstraintSet::symmetric_box(2, 1.0).unwrap();
        let schedule = ZscgSchedule::custom(60, 1e-4, 0.3, 32, OutputRule::Final).unwrap();
        let (out, record) = zscg(&problem, &set, &schedule, 7, &RunOptions::default()).unwrap();
        assert!((out[0] + 1.0).abs() < 1e-4);
        assert!((out[1] - 1.0).abs() < 1e-4);
        let final_gap = record.final_row().unwrap().fw_gap.unwrap();
        assert!(final_gap < 1e-3, "fw gap {final_gap}");
    }
}
