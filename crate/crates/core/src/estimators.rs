//! Gradient and Hessian estimators built from function evaluations.
//!
//! All estimators perturb along standard Gaussian directions `u ~ N(0, I)`.
//! The two-point gradient estimate
//!
//! ```text
//! G(x, xi, u) = [F(x + nu*u, xi+) - F(x, xi0)] / nu * u
//! ```
//!
//! is an unbiased estimate of the gradient of the smoothed objective
//! `f_nu(x) = E_u[ f(x + nu*u) ]`, which tracks `grad f` to `O(nu)`.
//! Curvature comes from the Gaussian identity
//! `E[(uu' - I) f(x + nu*u)] = nu^2 * Hess f_nu(x)`: second differences along
//! `u` give the rank-structured estimate
//!
//! ```text
//! H(x) = (uu' - I) * [F(x+nu*u) + F(x-nu*u) - 2F(x)] / (2 nu^2)
//! ```
//!
//! averaged over a batch of directions and stored as [`StructuredHessian`],
//! which supports `O(b*d)` matrix-vector products without ever materializing
//! the `d x d` matrix.
//!
//! Noise draws are fresh per oracle call, so a two-point sample costs exactly
//! 2 calls and a three-point Hessian sample costs 3; every estimate reports
//! its own call count for accounting.

use crate::error::{ensure_dim, ensure_finite, Result, ZoError};
use crate::oracle::{objective_value, ProblemSpec, ZeroOrderOracle};
use crate::rng::SeededStream;
use ndarray::{Array1, Array2, ArrayView1};

/// Geometry the smoothing analysis is carried out in. The arithmetic of the
/// estimators is identical; the mode records which moment bounds and schedule
/// constants apply (`Linf` for the coordinate-sparse solvers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NormMode {
    Euclidean,
    Linf,
}

/// Smoothing radius and geometry for one estimator call.
#[derive(Debug, Clone, Copy)]
pub struct SmoothingParams {
    pub nu: f64,
    pub norm_mode: NormMode,
}

impl SmoothingParams {
    pub fn euclidean(nu: f64) -> Self {
        SmoothingParams { nu, norm_mode: NormMode::Euclidean }
    }

    pub fn linf(nu: f64) -> Self {
        SmoothingParams { nu, norm_mode: NormMode::Linf }
    }

    fn validate(&self) -> Result<()> {
        if self.nu.is_finite() && self.nu > 0.0 {
            Ok(())
        } else {
            Err(ZoError::contract(format!(
                "smoothing radius must be positive and finite, got {}",
                self.nu
            )))
        }
    }
}

/// A gradient estimate plus the bookkeeping solvers need.
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    pub vector: Array1<f64>,
    pub nu: f64,
    /// Number of perturbation directions averaged.
    pub samples: usize,
    /// Oracle calls consumed: exactly `2 * samples`.
    pub oracle_calls: u64,
}

/// One two-point sample. Draws `u`, then evaluates at `x + nu*u` and `x`
/// (fresh noise for each evaluation).
pub fn grad_two_point(
    oracle: &ZeroOrderOracle<'_>,
    x: &ArrayView1<'_, f64>,
    params: &SmoothingParams,
    rng: &mut SeededStream,
) -> Result<GradientEstimate> {
    grad_averaged(oracle, x, params, 1, rng)
}

/// Averages `m` independent two-point samples. Unbiased for the smoothed
/// gradient; variance shrinks as `1/m`.
pub fn grad_averaged(
    oracle: &ZeroOrderOracle<'_>,
    x: &ArrayView1<'_, f64>,
    params: &SmoothingParams,
    m: usize,
    rng: &mut SeededStream,
) -> Result<GradientEstimate> {
    params.validate()?;
    if m == 0 {
        return Err(ZoError::contract("grad_averaged: batch size m must be positive"));
    }
    let d = oracle.problem().dimension();
    ensure_dim(x, d)?;
    ensure_finite(x, "grad_averaged")?;
    let nu = params.nu;
    let mut acc = Array1::<f64>::zeros(d);
    let mut shifted = Array1::<f64>::zeros(d);
    for _ in 0..m {
        let u = rng.gaussian_vec(d);
        for i in 0..d {
            shifted[i] = x[i] + nu * u[i];
        }
        let f_plus = oracle.evaluate(&shifted.view(), rng)?;
        let f_base = oracle.evaluate(x, rng)?;
        let scale = (f_plus - f_base) / nu;
        acc.scaled_add(scale, &u);
    }
    acc.mapv_inplace(|v| v / m as f64);
    if !acc.iter().all(|v| v.is_finite()) {
        return Err(ZoError::NonFinite { context: "grad_averaged output".into() });
    }
    Ok(GradientEstimate {
        vector: acc,
        nu,
        samples: m,
        oracle_calls: 2 * m as u64,
    })
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte-Carlo reference for the smoothed value `f_nu(x) = E_u f(x + nu*u)`.
///
/// Verification helper: requires a noiseless problem (`tau = 0`) and reads
/// objective values directly without touching any call counter.
pub fn smoothed_value_reference(
    problem: &ProblemSpec,
    x: &ArrayView1<'_, f64>,
    nu: f64,
    samples: usize,
    rng: &mut SeededStream,
) -> Result<McEstimate> {
    if problem.noise_std() != 0.0 {
        return Err(ZoError::contract(
            "smoothed_value_reference requires a noiseless problem (tau = 0)",
        ));
    }
    if samples == 0 {
        return Err(ZoError::contract("smoothed_value_reference: samples must be positive"));
    }
    SmoothingParams::euclidean(nu).validate()?;
    let d = problem.dimension();
    ensure_dim(x, d)?;
    ensure_finite(x, "smoothed_value_reference")?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut shifted = Array1::<f64>::zeros(d);
    for _ in 0..samples {
        let u = rng.gaussian_vec(d);
        for i in 0..d {
            shifted[i] = x[i] + nu * u[i];
        }
        let v = objective_value(problem, &shifted.view())?;
        sum += v;
        sum_sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    })
}

/// Rank-structured Hessian estimate `sum_i c_i u_i u_i' + shift * I`.
///
/// Estimator constructors set `identity_shift = -sum_i c_i`, which is what
/// the second-difference identity produces; [`StructuredHessian::from_parts`]
/// admits arbitrary shifts for synthetic instances.
#[derive(Debug, Clone)]
pub struct StructuredHessian {
    dim: usize,
    directions: Vec<Array1<f64>>,
    coefficients: Vec<f64>,
    identity_shift: f64,
    oracle_calls: u64,
}

impl StructuredHessian {
    pub fn from_parts(
        dim: usize,
        directions: Vec<Array1<f64>>,
        coefficients: Vec<f64>,
        identity_shift: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(ZoError::contract("StructuredHessian: dimension must be positive"));
        }
        if directions.len() != coefficients.len() {
            return Err(ZoError::contract(
                "StructuredHessian: one coefficient per direction required",
            ));
        }
        for u in &directions {
            if u.len() != dim {
                return Err(ZoError::DimensionMismatch { expected: dim, got: u.len() });
            }
            ensure_finite(&u.view(), "StructuredHessian direction")?;
        }
        if !coefficients.iter().all(|c| c.is_finite()) || !identity_shift.is_finite() {
            return Err(ZoError::NonFinite { context: "StructuredHessian coefficients".into() });
        }
        Ok(StructuredHessian {
            dim,
            directions,
            coefficients,
            identity_shift,
            oracle_calls: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rank-one terms (the batch size `b` for estimator output).
    pub fn batch(&self) -> usize {
        self.directions.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn identity_shift(&self) -> f64 {
        self.identity_shift
    }

    /// Oracle calls consumed building this estimate (0 for synthetic ones).
    pub fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }

    /// `H v` in `O(b * d)`.
    pub fn matvec(&self, v: &ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        ensure_dim(v, self.dim)?;
        let mut out = v.to_owned();
        out.mapv_inplace(|t| t * self.identity_shift);
        for (u, &c) in self.directions.iter().zip(&self.coefficients) {
            let proj = c * u.dot(v);
            out.scaled_add(proj, u);
        }
        Ok(out)
    }

    /// Upper bound on the spectral norm: `|shift| + sum_i |c_i| |u_i|^2`.
    pub fn operator_norm_bound(&self) -> f64 {
        let mut bound = self.identity_shift.abs();
        for (u, &c) in self.directions.iter().zip(&self.coefficients) {
            bound += c.abs() * u.dot(u);
        }
        bound
    }

    /// Dense form, for verification at small dimension only. Panics above
    /// `d = 64` so it cannot creep into large-scale paths.
    pub fn materialize(&self) -> Array2<f64> {
        assert!(
            self.dim <= 64,
            "StructuredHessian::materialize is test-only and limited to d <= 64 (got {})",
            self.dim
        );
        let mut h = Array2::<f64>::eye(self.dim);
        h.mapv_inplace(|v| v * self.identity_shift);
        for (u, &c) in self.directions.iter().zip(&self.coefficients) {
            // Fill the upper triangle and mirror so the result is symmetric
            // bit for bit.
            for i in 0..self.dim {
                for j in i..self.dim {
                    let t = c * (u[i] * u[j]);
                    h[[i, j]] += t;
                    if i != j {
                        h[[j, i]] = h[[i, j]];
                    }
                }
            }
        }
        h
    }

    /// Smallest eigenvalue by power iteration on the spectrally shifted
    /// operator `mu*I - H` with `mu = shift + sum_i |c_i||u_i|^2 >= lmax(H)`.
    /// Matvec-only; tolerance `1e-6`, at most 5000 iterations.
    pub fn min_eigenvalue(&self, rng: &mut SeededStream) -> Result<f64> {
        let mu = {
            let mut m = self.identity_shift;
            for (u, &c) in self.directions.iter().zip(&self.coefficients) {
                m += c.abs() * u.dot(u);
            }
            m
        };
        let mut v = rng.gaussian_vec(self.dim);
        let norm = v.dot(&v).sqrt();
        if norm < 1e-300 {
            v = Array1::from_elem(self.dim, 1.0 / (self.dim as f64).sqrt());
        } else {
            v.mapv_inplace(|t| t / norm);
        }
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let hv = self.matvec(&v.view())?;
            // w = (mu I - H) v
            let mut w = v.clone();
            w.mapv_inplace(|t| t * mu);
            w.scaled_add(-1.0, &hv);
            lambda = v.dot(&w);
            // Eigenpair residual |(mu I - H)v - lambda v|; for symmetric
            // operators the eigenvalue error is bounded by it.
            let mut resid = 0.0f64;
            for i in 0..self.dim {
                resid += (w[i] - lambda * v[i]).powi(2);
            }
            if resid.sqrt() <= 1e-6 * lambda.abs().max(1.0) {
                return Ok(mu - lambda);
            }
            let wnorm = w.dot(&w).sqrt();
            if wnorm < 1e-300 {
                // mu*I - H annihilates v: every direction sits at the shift.
                return Ok(mu);
            }
            w.mapv_inplace(|t| t / wnorm);
            v = w;
        }
        Ok(mu - lambda)
    }
}

/// Shared body of the second-difference estimators: draws `b` directions and
/// combines per-direction curvature coefficients into a StructuredHessian.
fn hess_from_coefficients(
    oracle: &ZeroOrderOracle<'_>,
    x: &ArrayView1<'_, f64>,
    params: &SmoothingParams,
    b: usize,
    rng: &mut SeededStream,
    mut coefficient: impl FnMut(
        &ZeroOrderOracle<'_>,
        &ArrayView1<'_, f64>,
        &Array1<f64>,
        f64,
        &mut SeededStream,
    ) -> Result<f64>,
) -> Result<StructuredHessian> {
    params.validate()?;
    if b == 0 {
        return Err(ZoError::contract("hessian estimator: batch size b must be positive"));
    }
    let d = oracle.problem().dimension();
    ensure_dim(x, d)?;
    ensure_finite(x, "hessian estimator")?;
    let calls_before = oracle.calls();
    let mut directions = Vec::with_capacity(b);
    let mut coefficients = Vec::with_capacity(b);
    for _ in 0..b {
        let u = rng.gaussian_vec(d);
        let c = coefficient(oracle, x, &u, params.nu, rng)? / b as f64;
        if !c.is_finite() {
            return Err(ZoError::NonFinite { context: "hessian coefficient".into() });
        }
        directions.push(u);
        coefficients.push(c);
    }
    let shift = -coefficients.iter().sum::<f64>();
    Ok(StructuredHessian {
        dim: d,
        directions,
        coefficients,
        identity_shift: shift,
        oracle_calls: oracle.calls() - calls_before,
    })
}

fn eval_shifted(
    oracle: &ZeroOrderOracle<'_>,
    x: &ArrayView1<'_, f64>,
    u: &Array1<f64>,
    nu: f64,
    rng: &mut SeededStream,
) -> Result<f64> {
    let shifted = Array1::from_iter(x.iter().zip(u.iter()).map(|(&xi, &ui)| xi + nu * ui));
    oracle.evaluate(&shifted.view(), rng)
}

/// Single-direction estimate `(uu' - I) F(x + nu*u) / nu^2`. One oracle call.
/// High variance; kept for empirical comparison against the differenced forms.
pub fn hess_one_point(
    oracle: &ZeroOrderOracle<'_>,
    x: &ArrayView1<'_, f64>,
    params: &SmoothingParams,
    rng: &mut SeededStream,
) -> Result<StructuredHessian> {
    hess_from_coefficients(oracle, x, params, 1, rng, |o, x, u, nu, rng| {
        Ok(eval_shifted(o, x, u, nu, rng)? / (nu * nu))
    })
}

/// Single-direction estimate `(uu' - I)[F(x + nu*u) - F(x)] / nu^2`.
/// Two oracle calls.
pub fn hess_two_point(
    oracle: &ZeroOrderOracle<'_>,
    x: &ArrayView1<'_, f64>,
    params: &SmoothingParams,
    rng: &mut SeededStream,
) -> Result<StructuredHessian> {
    hess_from_coefficients(oracle, x, params, 1, rng, |o, x, u, nu, rng| {
        let f_plus = eval_shifted(o, x, u, nu, rng)?;
        let f_base = o.evaluate(x, rng)?;
        Ok((f_plus - f_base) / (nu * nu))
    })
}

/// Single-direction symmetric second difference
/// `(uu' - I)[F(x+nu*u) + F(x-nu*u) - 2F(x)] / (2 nu^2)`. Three oracle calls;
/// the preferred estimator (odd noise terms cancel in expectation).
pub fn hess_three_point(
    oracle: &ZeroOrderOracle<'_>,
    x: &ArrayView1<'_, f64>,
    params: &SmoothingParams,
    rng: &mut SeededStream,
) -> Result<StructuredHessian> {
    hess_averaged(oracle, x, params, 1, rng)
}

/// Averages `b` three-point samples: coefficients
/// `c_i = [F(x+nu*u_i) + F(x-nu*u_i) - 2F(x)] / (2 nu^2 b)` with identity
/// shift `-sum_i c_i`. Exactly `3b` oracle calls; `F(x, xi)` is re-drawn per
/// direction so each sample sees independent noise.
pub fn hess_averaged(
    oracle: &ZeroOrderOracle<'_>,
    x: &ArrayView1<'_, f64>,
    params: &SmoothingParams,
    b: usize,
    rng: &mut SeededStream,
) -> Result<StructuredHessian> {
    hess_from_coefficients(oracle, x, params, b, rng, |o, x, u, nu, rng| {
        let f_plus = eval_shifted(o, x, u, nu, rng)?;
        let f_minus = {
            let shifted =
                Array1::from_iter(x.iter().zip(u.iter()).map(|(&xi, &ui)| xi - nu * ui));
            o.evaluate(&shifted.view(), rng)?
        };
        let f_base = o.evaluate(x, rng)?;
        Ok((f_plus + f_minus - 2.0 * f_base) / (2.0 * nu * nu))
    })
}

/// `H v` (convenience free function mirroring the method).
pub fn hessian_matvec(h: &StructuredHessian, v: &ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    h.matvec(v)
}

/// Monte-Carlo estimate of `E |u|_inf^k` for `u ~ N(0, I_d)`.
///
/// The max of `d` standard Gaussians concentrates at `sqrt(2 log d)`, so this
/// moment grows like `(2 log d)^{k/2}` up to a constant; the coordinate-sparse
/// schedules lean on that bound and `validate-estimators` spot-checks it.
pub fn linf_moment_estimate(d: usize, k: u32, samples: usize, rng: &mut SeededStream) -> f64 {
    assert!(d > 0 && samples > 0);
    let mut sum = 0.0;
    for _ in 0..samples {
        let mut maxabs = 0.0f64;
        for _ in 0..d {
            maxabs = maxabs.max(rng.gaussian().abs());
        }
        sum += maxabs.powi(k as i32);
    }
    sum / samples as f64
}
