//! Stochastic cubic-regularized Newton from zeroth-order estimates.
//!
//! Each iteration estimates a gradient (averaged two-point samples) and a
//! Hessian (averaged second-difference samples, kept in low-rank-plus-shift
//! form), then minimizes the cubic model
//!
//! ```text
//! m(s) = <g, s> + (1/2) <H s, s> + (alpha / 6) |s|^3
//! ```
//!
//! and steps to `x + s`. The subproblem is solved matvec-only: gradient
//! descent on `m` with step `1 / (|H| bound + alpha |s|)`, plus a small
//! random perturbation of the start when `g` is (numerically) zero, which
//! handles the hard case where the gradient has no component along the most
//! negative curvature direction. At a minimizer, `g + H s + (alpha/2)|s| s =
//! 0` and `H + (alpha/2)|s| I` is positive semidefinite; the returned
//! certificate carries the first-order residual and that curvature witness.

use crate::cg_solvers::RunOptions;
use crate::error::{ensure_finite, Result, ZoError};
use crate::estimators::{grad_averaged, hess_averaged, SmoothingParams, StructuredHessian};
use crate::linalg::symmetric_eigenvalues;
use crate::oracle::{reference_gradient, reference_hessian, ProblemSpec, ZeroOrderOracle};
use crate::rng::SeededStream;
use crate::trace::{fill_standard_metrics, RunRecord, TraceCadence, TraceColumns, TraceRow};
use crate::DecisionVector;
use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

// Same runaway-iterate guard as the high-dimensional solvers.
use crate::highdim::DIVERGENCE_LIMIT;

/// The cubic model built from one iteration's estimates.
#[derive(Debug, Clone)]
pub struct CubicModel {
    gradient: Array1<f64>,
    hessian: StructuredHessian,
    alpha: f64,
}

impl CubicModel {
    pub fn new(gradient: Array1<f64>, hessian: StructuredHessian, alpha: f64) -> Result<Self> {
        if gradient.len() != hessian.dim() {
            return Err(ZoError::DimensionMismatch {
                expected: hessian.dim(),
                got: gradient.len(),
            });
        }
        ensure_finite(&gradient.view(), "cubic model gradient")?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ZoError::contract("cubic model: alpha must be positive"));
        }
        Ok(CubicModel { gradient, hessian, alpha })
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gradient_estimate(&self) -> &Array1<f64> {
        &self.gradient
    }

    pub fn hessian_estimate(&self) -> &StructuredHessian {
        &self.hessian
    }

    /// `m(s)`; zero at `s = 0` by construction.
    pub fn value(&self, s: &ArrayView1<'_, f64>) -> Result<f64> {
        let hs = self.hessian.matvec(s)?;
        let norm = s.dot(s).sqrt();
        Ok(self.gradient.dot(s) + 0.5 * hs.dot(s) + self.alpha / 6.0 * norm.powi(3))
    }

    /// `grad m(s) = g + H s + (alpha/2) |s| s`.
    pub fn model_gradient(&self, s: &ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let mut out = self.hessian.matvec(s)?;
        let norm = s.dot(s).sqrt();
        let scale = self.alpha / 2.0 * norm;
        out.zip_mut_with(&self.gradient.view(), |o, g| *o += g);
        out.zip_mut_with(s, |o, si| *o += scale * si);
        Ok(out)
    }

    /// First-order stationarity residual `|grad m(s)|`.
    pub fn residual(&self, s: &ArrayView1<'_, f64>) -> Result<f64> {
        let g = self.model_gradient(s)?;
        Ok(g.dot(&g).sqrt())
    }
}

/// Evidence returned with an accepted subproblem solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubicCertificate {
    /// `|g + H s + (alpha/2)|s| s|` at the returned step.
    pub residual: f64,
    /// `m(s)`; nonpositive (descent from `s = 0` is monotone).
    pub model_value: f64,
    /// `lambda_min(H) + (alpha/2)|s|`, the second optimality condition;
    /// nonnegative up to solver tolerance at a global model minimizer.
    pub lambda_min_witness: f64,
    /// Gradient-descent iterations spent.
    pub iterations: usize,
}

/// Minimizes `g s + h s^2 / 2 + alpha |s|^3 / 6` over scalar `s` in closed
/// form (quadratic formula on each sign branch). Reference oracle for the
/// subproblem solver at `d = 1`.
pub fn min_scalar_cubic(g: f64, h: f64, alpha: f64) -> (f64, f64) {
    assert!(alpha > 0.0, "alpha must be positive");
    let value = |s: f64| g * s + 0.5 * h * s * s + alpha / 6.0 * s.abs().powi(3);
    let mut best = (0.0, 0.0);
    // s >= 0 branch: (alpha/2) s^2 + h s + g = 0.
    let disc_pos = h * h - 2.0 * alpha * g;
    if disc_pos >= 0.0 {
        for root in [(-h + disc_pos.sqrt()) / alpha, (-h - disc_pos.sqrt()) / alpha] {
            if root >= 0.0 && value(root) < best.1 {
                best = (root, value(root));
            }
        }
    }
    // s <= 0 branch: -(alpha/2) s^2 + h s + g = 0.
    let disc_neg = h * h + 2.0 * alpha * g;
    if disc_neg >= 0.0 {
        for root in [(h + disc_neg.sqrt()) / alpha, (h - disc_neg.sqrt()) / alpha] {
            if root <= 0.0 && value(root) < best.1 {
                best = (root, value(root));
            }
        }
    }
    best
}

/// Minimizes the cubic model by matvec-only gradient descent.
///
/// `tol` bounds the accepted first-order residual. The step size is
/// `1 / (|H| bound + alpha |s|)`, halved whenever a trial step increases the
/// model by more than a rounding-scale slack, so descent from `m(0) = 0` is
/// monotone up to float noise. When `|g| < 1e-8` the start is perturbed by a
/// random direction of size `1e-3` unless `s = 0` already satisfies both
/// optimality conditions.
pub fn solve_cubic_subproblem(
    model: &CubicModel,
    tol: f64,
    max_iters: usize,
    rng: &mut SeededStream,
) -> Result<(DecisionVector, CubicCertificate)> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ZoError::contract("cubic subsolver: tol must be positive"));
    }
    let d = model.dim();
    let h_bound = model.hessian_estimate().operator_norm_bound();
    let g_norm = {
        let g = model.gradient_estimate();
        g.dot(g).sqrt()
    };

    let mut s: Array1<f64> = Array1::zeros(d);
    if g_norm < 1e-8 {
        let witness = model.hessian_estimate().min_eigenvalue(rng)?;
        if witness >= -tol {
            return Ok((
                s,
                CubicCertificate {
                    residual: g_norm,
                    model_value: 0.0,
                    lambda_min_witness: witness,
                    iterations: 0,
                },
            ));
        }
        let dir = rng.gaussian_vec(d);
        let norm = dir.dot(&dir).sqrt().max(f64::MIN_POSITIVE);
        s = dir.mapv(|v| 1e-3 * v / norm);
    }

    let mut value = model.value(&s.view())?;
    let mut best_s = s.clone();
    let mut best_value = value;
    let mut residual = f64::INFINITY;
    for it in 0..max_iters {
        let grad = model.model_gradient(&s.view())?;
        residual = grad.dot(&grad).sqrt();
        if residual <= tol {
            let norm = s.dot(&s).sqrt();
            let witness =
                model.hessian_estimate().min_eigenvalue(rng)? + model.alpha / 2.0 * norm;
            return Ok((
                s,
                CubicCertificate {
                    residual,
                    model_value: value,
                    lambda_min_witness: witness,
                    iterations: it,
                },
            ));
        }
        let s_norm = s.dot(&s).sqrt();
        let mut step = 1.0 / (h_bound + model.alpha * s_norm).max(f64::MIN_POSITIVE);
        // Descent check with a float-noise slack: near the minimizer the
        // evaluated value fluctuates at rounding scale while the iterate
        // (and residual) still improve, so exact comparisons would stall.
        let slack = 1e-12 * (1.0 + value.abs());
        let mut stalled = true;
        while step * residual >= 1e-18 {
            let trial = Array1::from_iter(
                s.iter().zip(grad.iter()).map(|(si, gi)| si - step * gi),
            );
            let trial_value = model.value(&trial.view())?;
            if trial_value <= value + slack {
                if trial != s {
                    s = trial;
                    value = trial_value;
                    stalled = false;
                }
                break;
            }
            step *= 0.5;
        }
        if stalled {
            // No representable descent step exists; report the best point.
            if value < best_value {
                best_s.assign(&s);
            }
            return Err(ZoError::IterationBudget {
                context: "cubic subproblem",
                iterations: it,
                residual,
                best: best_s.to_vec(),
            });
        }
        if value < best_value {
            best_value = value;
            best_s.assign(&s);
        }
    }
    Err(ZoError::IterationBudget {
        context: "cubic subproblem",
        iterations: max_iters,
        residual,
        best: best_s.to_vec(),
    })
}

/// Parameters for [`zscrn`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubicParams {
    /// Iteration count `N`.
    pub n_iters: usize,
    /// Smoothing radius.
    pub nu: f64,
    /// Cubic weight; the guarantees take it equal to the Hessian Lipschitz
    /// constant.
    pub alpha: f64,
    /// Gradient samples per iteration (`2 m` oracle calls).
    pub grad_batch: usize,
    /// Hessian samples per iteration (`3 b` oracle calls).
    pub hess_batch: usize,
    /// Base subsolver tolerance; the per-step tolerance is
    /// `subsolver_tol * max(1, |g|)` with `g` the step's gradient estimate.
    pub subsolver_tol: f64,
    /// Subsolver iteration cap per step.
    pub subsolver_max_iters: usize,
}

impl CubicParams {
    /// Batch and smoothing rules under which the second-order guarantee is
    /// stated, for target accuracy `epsilon`:
    /// `alpha = L_H`, `N = 12 sqrt(L_H) (f(x0) - f*) / eps^{3/2}`,
    /// `nu = min{sqrt(L_H eps / (36 (d+16)^5)), eps / (L (d+3)^{3/2})} / 2`,
    /// `b = (2 L^2 / L_H) (4 (d+16)^2)^4 (1 + 2 log 2d)^{1/3} / eps`,
    /// `m = 26 (d+5) (B^2 + sigma^2) / eps^2` (counts rounded up).
    ///
    /// The constants are astronomically conservative (`b` scales like
    /// `d^8`); this constructor exists so the rules are checkable, while
    /// experiments run [`CubicParams::practical`] batches.
    pub fn theory(
        problem: &ProblemSpec,
        epsilon: f64,
        gradient_bound: f64,
        initial_gap: f64,
    ) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(ZoError::contract("cubic: epsilon must be positive"));
        }
        if !(initial_gap.is_finite() && initial_gap > 0.0) {
            return Err(ZoError::contract("cubic: initial_gap must be positive"));
        }
        let d = problem.dimension() as f64;
        let l = problem.lipschitz_grad().max(f64::MIN_POSITIVE);
        let l_h = problem.lipschitz_hess().max(f64::MIN_POSITIVE);
        let sigma = problem.noise_std();
        let b2 = gradient_bound * gradient_bound + sigma * sigma;
        let nu = 0.5
            * (l_h * epsilon / (36.0 * (d + 16.0).powi(5)))
                .sqrt()
                .min(epsilon / (l * (d + 3.0).powf(1.5)));
        let n = (12.0 * l_h.sqrt() * initial_gap / epsilon.powf(1.5)).ceil().max(1.0);
        let b = (2.0 * l * l / l_h
            * (4.0 * (d + 16.0).powi(2)).powi(4)
            * (1.0 + 2.0 * (2.0 * d).ln()).cbrt()
            / epsilon)
            .ceil();
        let m = (26.0 * (d + 5.0) * b2 / (epsilon * epsilon)).ceil();
        if !(n.is_finite() && b.is_finite() && m.is_finite()) {
            return Err(ZoError::contract("cubic: theory parameters overflow"));
        }
        Ok(CubicParams {
            n_iters: n as usize,
            nu,
            alpha: l_h,
            grad_batch: (m as usize).max(1),
            hess_batch: (b as usize).max(1),
            subsolver_tol: (epsilon / 10.0).min(1e-6),
            subsolver_max_iters: 200_000,
        })
    }

    /// Desk-scale batches with explicit values everywhere.
    pub fn practical(n_iters: usize, nu: f64, alpha: f64, grad_batch: usize, hess_batch: usize) -> Result<Self> {
        let p = CubicParams {
            n_iters,
            nu,
            alpha,
            grad_batch,
            hess_batch,
            subsolver_tol: 1e-8,
            subsolver_max_iters: 200_000,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iters == 0 {
            return Err(ZoError::contract("cubic: n_iters must be positive"));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(ZoError::contract("cubic: nu must be positive"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(ZoError::contract("cubic: alpha must be positive"));
        }
        if self.grad_batch == 0 || self.hess_batch == 0 {
            return Err(ZoError::contract("cubic: batches must be positive"));
        }
        if !(self.subsolver_tol.is_finite() && self.subsolver_tol > 0.0) {
            return Err(ZoError::contract("cubic: subsolver_tol must be positive"));
        }
        Ok(())
    }
}

/// Reference second-order stationarity data: `(|grad f(x)|, lambda_min(grad^2 f(x)))`.
pub fn second_order_criterion(problem: &ProblemSpec, x: &ArrayView1<'_, f64>) -> Result<(f64, f64)> {
    let g = reference_gradient(problem, x)?;
    let h = reference_hessian(problem, x)?;
    let eigs = symmetric_eigenvalues(&h.view())?;
    Ok((g.dot(&g).sqrt(), eigs[0]))
}

/// Cubic-regularized Newton with estimated derivatives.
///
/// Starts at `x0` (all-zero when omitted), runs `N` iterations of
/// estimate-then-cubic-step, and returns `x_R` with `R` uniform over
/// `{1, ..., N}`. Trace rows add the reference smallest Hessian eigenvalue,
/// the model decrease of the accepted step, and subsolver iterations.
pub fn zscrn(
    problem: &ProblemSpec,
    params: &CubicParams,
    x0: Option<&ArrayView1<'_, f64>>,
    seed: u64,
    options: &RunOptions,
) -> Result<(DecisionVector, RunRecord)> {
    params.validate()?;
    let d = problem.dimension();
    let mut stream = SeededStream::new(seed);
    let mut output_stream = stream.split();
    let r = output_stream.uniform_index(1, params.n_iters) as u64;

    let oracle = ZeroOrderOracle::new(problem);
    let smoothing = SmoothingParams::euclidean(params.nu);
    let cadence = TraceCadence::new(params.n_iters as u64);

    let mut x: Array1<f64> = match x0 {
        Some(v) => {
            if v.len() != d {
                return Err(ZoError::DimensionMismatch { expected: d, got: v.len() });
            }
            ensure_finite(v, "zscrn start")?;
            v.to_owned()
        }
        None => Array1::zeros(d),
    };
    let mut snapshot = x.clone();
    let mut grad_calls = 0u64;
    let mut hess_calls = 0u64;
    let mut rows: Vec<TraceRow> = Vec::new();

    let log = |rows: &mut Vec<TraceRow>,
               x: &Array1<f64>,
               k: u64,
               calls: u64,
               decrease: Option<f64>,
               sub_iters: Option<u64>|
     -> Result<()> {
        let mut row = TraceRow {
            k,
            calls,
            model_decrease: decrease,
            subsolver_iters: sub_iters,
            ..Default::default()
        };
        if options.verify {
            fill_standard_metrics(&mut row, problem, None, &x.view(), problem.lipschitz_grad())?;
            if let Ok(h) = reference_hessian(problem, &x.view()) {
                row.lambda_min = Some(symmetric_eigenvalues(&h.view())?[0]);
            }
        }
        rows.push(row);
        Ok(())
    };
    log(&mut rows, &x, 0, 0, None, None)?;

    let mut last_decrease = None;
    let mut last_sub_iters = None;
    for k in 1..=params.n_iters {
        let est = grad_averaged(&oracle, &x.view(), &smoothing, params.grad_batch, &mut stream)?;
        grad_calls += est.oracle_calls;
        let hess = hess_averaged(&oracle, &x.view(), &smoothing, params.hess_batch, &mut stream)?;
        hess_calls += hess.oracle_calls();

        let g_norm = est.vector.dot(&est.vector).sqrt();
        let tol = params.subsolver_tol * g_norm.max(1.0);
        let model = CubicModel::new(est.vector, hess, params.alpha)?;
        let (step, cert) =
            solve_cubic_subproblem(&model, tol, params.subsolver_max_iters, &mut stream)?;
        x += &step;

        let inf_norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !inf_norm.is_finite() || inf_norm > DIVERGENCE_LIMIT {
            return Err(ZoError::Divergence { iteration: k, norm: inf_norm, trace: rows });
        }
        last_decrease = Some(cert.model_value);
        last_sub_iters = Some(cert.iterations as u64);
        if k as u64 == r {
            snapshot.assign(&x);
        }
        if cadence.should_record(k as u64) {
            log(&mut rows, &x, k as u64, oracle.calls(), last_decrease, last_sub_iters)?;
        }
    }
    debug_assert_eq!(grad_calls + hess_calls, oracle.calls());

    let output = snapshot;
    log(&mut rows, &output, r, oracle.calls(), last_decrease, last_sub_iters)?;
    let record = RunRecord {
        algorithm: "zscrn".into(),
        seed,
        schedule: serde_json::to_value(params)?,
        columns: TraceColumns::Cubic,
        rows,
        output_index: Some(r),
        gradient_oracle_calls: grad_calls,
        hessian_oracle_calls: hess_calls,
        lmo_calls: 0,
        output_point: output.to_vec(),
    };
    Ok((output, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn scalar_model(g: f64, h: f64, alpha: f64) -> CubicModel {
        let hessian =
            StructuredHessian::from_parts(1, vec![array![1.0]], vec![h], 0.0).unwrap();
        CubicModel::new(array![g], hessian, alpha).unwrap()
    }

    #[test]
    fn zero_gradient_psd_hessian_returns_origin() {
        let hessian =
            StructuredHessian::from_parts(2, vec![array![1.0, 0.0]], vec![2.0], 0.5).unwrap();
        let model = CubicModel::new(array![0.0, 0.0], hessian, 1.0).unwrap();
        let mut rng = SeededStream::new(1);
        let (s, cert) = solve_cubic_subproblem(&model, 1e-10, 1000, &mut rng).unwrap();
        assert_eq!(s, array![0.0, 0.0]);
        assert_eq!(cert.residual, 0.0);
        assert_eq!(cert.model_value, 0.0);
        assert!(cert.lambda_min_witness >= 0.4);
    }

    #[test]
    fn scalar_negative_curvature_instance_matches_closed_form() {
        // m(s) = s - s^2/2 + |s|^3/6; stationarity on the negative branch is
        // s^2/2 + s - 1 = 0, whose negative root is -(1 + sqrt(3)). The
        // curvature condition H + (alpha/2)|s| = -1 + (1+sqrt(3))/2 >= 0
        // holds there and fails at the positive-branch-reflected value.
        let (s_ref, v_ref) = min_scalar_cubic(1.0, -1.0, 1.0);
        let expected = -(1.0 + 3.0f64.sqrt());
        assert!((s_ref - expected).abs() < 1e-12, "closed form {s_ref}");
        assert!((v_ref - (expected - expected * expected / 2.0 - expected.powi(3) / 6.0)).abs() < 1e-12);

        let model = scalar_model(1.0, -1.0, 1.0);
        let mut rng = SeededStream::new(2);
        let (s, cert) = solve_cubic_subproblem(&model, 1e-8, 100_000, &mut rng).unwrap();
        assert!((s[0] - expected).abs() < 1e-6, "subsolver {}", s[0]);
        assert!(cert.residual <= 1e-8);
        assert!(cert.lambda_min_witness >= -1e-8);
        assert!((cert.model_value - v_ref).abs() < 1e-8);
    }

    #[test]
    fn scalar_closed_form_agrees_with_grid_scan() {
        for (g, h, alpha) in [
            (1.0, -1.0, 1.0),
            (0.3, 0.5, 2.0),
            (-0.7, -0.2, 0.5),
            (0.0, -2.0, 1.0),
            (2.5, 1.0, 3.0),
        ] {
            let (s_star, v_star) = min_scalar_cubic(g, h, alpha);
            let value = |s: f64| g * s + 0.5 * h * s * s + alpha / 6.0 * s.abs().powi(3);
            let mut grid_best = (0.0, value(0.0));
            let mut t = -10.0;
            while t <= 10.0 {
                if value(t) < grid_best.1 {
                    grid_best = (t, value(t));
                }
                t += 1e-4;
            }
            // (0, -2, 1) has two global minimizers at +-4; compare magnitudes.
            assert!(
                (s_star.abs() - grid_best.0.abs()).abs() < 1e-3,
                "({g},{h},{alpha}): closed {s_star} grid {}",
                grid_best.0
            );
            assert!(v_star <= grid_best.1 + 1e-9);
        }
    }

    #[test]
    fn hard_case_zero_gradient_escapes_negative_curvature() {
        // g = 0, H has a -1 eigenvalue: s = 0 is stationary for the model but
        // not its minimum; the perturbed start must find a nonzero step with
        // negative model value.
        let hessian =
            StructuredHessian::from_parts(2, vec![array![0.0, 1.0]], vec![-1.0], 0.0).unwrap();
        let model = CubicModel::new(array![0.0, 0.0], hessian, 1.0).unwrap();
        let mut rng = SeededStream::new(3);
        let (s, cert) = solve_cubic_subproblem(&model, 1e-8, 100_000, &mut rng).unwrap();
        let norm = s.dot(&s).sqrt();
        // Minimizer: |s| = 2 lambda / alpha = 2 along the curvature direction.
        assert!((norm - 2.0).abs() < 1e-6, "step norm {norm}");
        assert!(s[0].abs() < 1e-6);
        assert!(cert.model_value < -0.5);
        assert!(cert.lambda_min_witness >= -1e-8);
    }

    #[test]
    fn random_instances_beat_random_direction_search() {
        let d = 10;
        let mut rng = SeededStream::new(7);
        for trial in 0..5 {
            let g = rng.gaussian_vec(d);
            let dirs: Vec<Array1<f64>> = (0..6).map(|_| rng.gaussian_vec(d)).collect();
            let coeffs: Vec<f64> = (0..6).map(|_| rng.gaussian()).collect();
            let hessian = StructuredHessian::from_parts(d, dirs, coeffs, 0.3).unwrap();
            let model = CubicModel::new(g, hessian, 1.5).unwrap();
            let (s, cert) = solve_cubic_subproblem(&model, 1e-9, 200_000, &mut rng).unwrap();
            assert!(cert.residual <= 1e-9);
            assert!(cert.model_value <= model.value(&s.view()).unwrap() + 1e-12);

            // Randomized lower-bound oracle: best over random unit directions
            // with closed-form scalar minimization along each.
            let mut best = 0.0f64;
            for _ in 0..2000 {
                let u = rng.gaussian_vec(d);
                let un = u.mapv(|v| v / u.dot(&u).sqrt());
                let gu = model.gradient_estimate().dot(&un);
                let hu = model.hessian_estimate().matvec(&un.view()).unwrap().dot(&un);
                let (_, val) = min_scalar_cubic(gu, hu, 1.5);
                best = best.min(val);
            }
            assert!(
                cert.model_value <= best + 1e-9,
                "trial {trial}: model {} vs direction search {best}",
                cert.model_value
            );
        }
    }

    #[test]
    fn model_decrease_dominates_cubic_norm_term() {
        // At the model minimizer, m(s) <= -(alpha/12)|s|^3.
        let mut rng = SeededStream::new(11);
        for _ in 0..10 {
            let g = rng.gaussian_vec(6);
            let dirs: Vec<Array1<f64>> = (0..4).map(|_| rng.gaussian_vec(6)).collect();
            let coeffs: Vec<f64> = (0..4).map(|_| 0.5 * rng.gaussian()).collect();
            let hessian = StructuredHessian::from_parts(6, dirs, coeffs, -0.2).unwrap();
            let model = CubicModel::new(g, hessian, 2.0).unwrap();
            let (s, cert) = solve_cubic_subproblem(&model, 1e-9, 200_000, &mut rng).unwrap();
            let norm = s.dot(&s).sqrt();
            assert!(
                cert.model_value <= -2.0 / 12.0 * norm.powi(3) + 1e-9,
                "decrease {} vs bound {}",
                cert.model_value,
                -2.0 / 12.0 * norm.powi(3)
            );
        }
    }

    #[test]
    fn theory_parameters_match_closed_forms() {
        let a = Array2::eye(3);
        let problem = ProblemSpec::quadratic(a, Array1::zeros(3), 0.0, 2.0).unwrap();
        // Quadratics have zero Hessian Lipschitz constant; the constructor
        // floors it, so exercise the formulas through a saddle instance.
        let saddle = ProblemSpec::strict_saddle_2d(0.0, 2.0).unwrap();
        let eps = 0.1;
        let p = CubicParams::theory(&saddle, eps, 3.0, 1.0).unwrap();
        let d = 2.0f64;
        let l = saddle.lipschitz_grad();
        let l_h = saddle.lipschitz_hess();
        assert_eq!(p.alpha, l_h);
        let nu_expected = 0.5
            * (l_h * eps / (36.0 * (d + 16.0).powi(5)))
                .sqrt()
                .min(eps / (l * (d + 3.0).powf(1.5)));
        assert!((p.nu - nu_expected).abs() < 1e-15);
        assert_eq!(p.n_iters, (12.0 * l_h.sqrt() * 1.0 / eps.powf(1.5)).ceil() as usize);
        assert_eq!(
            p.grad_batch,
            (26.0 * (d + 5.0) * 9.0 / (eps * eps)).ceil() as usize
        );
        let b_expected = (2.0 * l * l / l_h
            * (4.0 * (d + 16.0).powi(2)).powi(4)
            * (1.0 + 2.0 * 4.0f64.ln()).cbrt()
            / eps)
            .ceil() as usize;
        assert_eq!(p.hess_batch, b_expected);
        drop(problem);
    }

    #[test]
    fn second_order_criterion_hand_values() {
        let saddle = ProblemSpec::strict_saddle_2d(0.0, 2.0).unwrap();
        let (g, lmin) = second_order_criterion(&saddle, &array![1.0, 0.0].view()).unwrap();
        assert!(g.abs() < 1e-12);
        assert!((lmin - 1.0).abs() < 1e-12);
        let (g, lmin) = second_order_criterion(&saddle, &array![0.0, 0.0].view()).unwrap();
        assert!(g.abs() < 1e-12);
        assert!((lmin + 1.0).abs() < 1e-12);
        let (g, lmin) = second_order_criterion(&saddle, &array![0.5, 0.0].view()).unwrap();
        assert!((g - 0.375).abs() < 1e-12);
        assert!((lmin + 0.25).abs() < 1e-12);
    }

    #[test]
    fn quadratic_with_exactish_estimates_contracts_like_newton() {
        // Strongly convex quadratic, alpha small, large batches, tiny nu:
        // one cubic step from x0 should cover most of the gap to the optimum.
        let a = ndarray::array![[2.0, 0.3], [0.3, 1.0]];
        let c = array![-1.0, 0.5];
        let problem = ProblemSpec::quadratic(a, c, 0.0, 4.0).unwrap();
        let params = CubicParams::practical(3, 1e-5, 0.05, 4000, 4000).unwrap();
        let x0 = array![1.5, -1.0];
        let (out, record) =
            zscrn(&problem, &params, Some(&x0.view()), 5, &RunOptions::default()).unwrap();
        let star = problem.optimum_point().unwrap();
        let f_gaps: Vec<f64> = record.rows.iter().filter_map(|r| r.f_gap).collect();
        // Monotone decrease across iterations and a near-optimal final point.
        assert!(f_gaps.windows(2).all(|w| w[1] <= w[0] + 1e-6), "{f_gaps:?}");
        let dist = (&out - star).dot(&(&out - star)).sqrt();
        assert!(dist < 0.2, "distance to optimum {dist}");
    }

    #[test]
    fn accounting_splits_gradient_and_hessian_calls() {
        let problem = ProblemSpec::strict_saddle_2d(0.0, 2.0).unwrap();
        let params = CubicParams::practical(4, 1e-3, 3.0, 10, 7).unwrap();
        let (_, record) = zscrn(&problem, &params, None, 9, &RunOptions::default()).unwrap();
        assert_eq!(record.gradient_oracle_calls, 4 * 2 * 10);
        assert_eq!(record.hessian_oracle_calls, 4 * 3 * 7);
        assert_eq!(record.output_index.map(|r| r >= 1), Some(true));
        let last = record.final_row().unwrap();
        assert!(last.lambda_min.is_some());
        assert!(last.model_decrease.unwrap() <= 0.0);
    }

    #[test]
    fn never_materializes_large_dimensions() {
        // d = 80 exceeds the dense-materialization cutoff; the run must
        // succeed because everything is matvec-only.
        let a = Array2::eye(80);
        let problem = ProblemSpec::quadratic(a, Array1::zeros(80), 0.0, 2.0).unwrap();
        let params = CubicParams::practical(2, 1e-3, 0.5, 20, 20).unwrap();
        let x0 = Array1::from_elem(80, 0.5);
        let (out, _) = zscrn(&problem, &params, Some(&x0.view()), 3, &RunOptions::default()).unwrap();
        assert_eq!(out.len(), 80);
    }
}
