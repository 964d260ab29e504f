//! Noisy zeroth-order oracles over analytic test families.
//!
//! A [`ProblemSpec`] fixes a smooth objective `f`, a noise level, and the
//! reference constants solvers need (gradient Lipschitz constant, Hessian
//! Lipschitz constant, optimum when known). The only thing solvers may query
//! at runtime is [`ZeroOrderOracle::evaluate`], which returns
//! `F(x, xi) = f(x) + tau * xi` with `xi ~ N(0,1)` drawn fresh per call and
//! bumps a per-run call counter.
//!
//! `reference_gradient` / `reference_hessian` expose exact derivatives of the
//! noiseless `f` for verification and metrics; they never touch the counter,
//! so accounting identities stay exact.

use crate::error::{ensure_dim, ensure_finite, Result, ZoError};
use crate::linalg;
use crate::rng::SeededStream;
use ndarray::{Array1, Array2, ArrayView1};
use serde::Deserialize;
use std::cell::Cell;

/// Objective families. Each is smooth with analytically known derivatives.
#[derive(Debug, Clone)]
pub enum ProblemFamily {
    /// `f(x) = 0.5 x'Ax + c'x` with symmetric `A`.
    Quadratic { a: Array2<f64>, c: Array1<f64> },
    /// A quadratic that reads only the coordinates in `support`; the gradient
    /// is zero everywhere else. `a`/`c` live on the support coordinates, in
    /// the order listed by `support`.
    SparseSupport {
        support: Vec<usize>,
        a: Array2<f64>,
        c: Array1<f64>,
    },
    /// `f(x, y) = x^4/4 - x^2/2 + y^2/2`: strict saddle at the origin with
    /// Hessian eigenvalues (-1, 1), minima at (+-1, 0).
    StrictSaddle2d,
    /// `f(x) = 0.5 |Ax - b|^2`.
    LeastSquares { a: Array2<f64>, b: Array1<f64> },
}

/// A fully specified problem instance plus its reference constants.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    family: ProblemFamily,
    dimension: usize,
    noise_std: f64,
    box_radius: f64,
    lipschitz_grad: f64,
    lipschitz_hess: f64,
    optimum_value: Option<f64>,
    optimum_point: Option<Array1<f64>>,
}

fn validate_symmetric(a: &Array2<f64>, what: &str) -> Result<()> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(ZoError::contract(format!("{what}: matrix must be square")));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if (a[[i, j]] - a[[j, i]]).abs() > 1e-9 * (1.0 + a[[i, j]].abs()) {
                return Err(ZoError::contract(format!("{what}: matrix must be symmetric")));
            }
        }
    }
    Ok(())
}

/// `f*` and `x*` of `0.5 x'Ax + c'x` when `A` is positive definite.
fn quadratic_optimum(a: &Array2<f64>, c: &Array1<f64>) -> (Option<f64>, Option<Array1<f64>>) {
    let neg_c = c.mapv(|v| -v);
    match linalg::cholesky_solve(&a.view(), &neg_c.view()) {
        Some(xstar) => {
            let fstar = 0.5 * xstar.dot(&a.dot(&xstar)) + c.dot(&xstar);
            (Some(fstar), Some(xstar))
        }
        None => (None, None),
    }
}

impl ProblemSpec {
    pub fn quadratic(a: Array2<f64>, c: Array1<f64>, noise_std: f64, box_radius: f64) -> Result<Self> {
        validate_symmetric(&a, "quadratic")?;
        let d = a.nrows();
        if c.len() != d {
            return Err(ZoError::DimensionMismatch { expected: d, got: c.len() });
        }
        if noise_std < 0.0 || box_radius <= 0.0 {
            return Err(ZoError::contract("quadratic: noise_std >= 0 and box_radius > 0 required"));
        }
        let lipschitz_grad = linalg::symmetric_operator_norm(&a.view())?;
        let (optimum_value, optimum_point) = quadratic_optimum(&a, &c);
        Ok(ProblemSpec {
            family: ProblemFamily::Quadratic { a, c },
            dimension: d,
            noise_std,
            box_radius,
            lipschitz_grad,
            lipschitz_hess: 0.0,
            optimum_value,
            optimum_point,
        })
    }

    pub fn sparse_support(
        dimension: usize,
        support: Vec<usize>,
        a: Array2<f64>,
        c: Array1<f64>,
        noise_std: f64,
        box_radius: f64,
    ) -> Result<Self> {
        validate_symmetric(&a, "sparse_support")?;
        let s = support.len();
        if s == 0 || a.nrows() != s || c.len() != s {
            return Err(ZoError::contract(
                "sparse_support: inner matrix/linear term must match the support size",
            ));
        }
        let mut seen = vec![false; dimension];
        for &i in &support {
            if i >= dimension {
                return Err(ZoError::contract(format!(
                    "sparse_support: support index {i} out of range for dimension {dimension}"
                )));
            }
            if seen[i] {
                return Err(ZoError::contract(format!("sparse_support: duplicate support index {i}")));
            }
            seen[i] = true;
        }
        if noise_std < 0.0 || box_radius <= 0.0 {
            return Err(ZoError::contract("sparse_support: noise_std >= 0 and box_radius > 0 required"));
        }
        let lipschitz_grad = linalg::symmetric_operator_norm(&a.view())?;
        let (inner_value, inner_point) = quadratic_optimum(&a, &c);
        let optimum_point = inner_point.map(|xs| {
            let mut full = Array1::zeros(dimension);
            for (slot, &i) in support.iter().enumerate() {
                full[i] = xs[slot];
            }
            full
        });
        Ok(ProblemSpec {
            family: ProblemFamily::SparseSupport { support, a, c },
            dimension,
            noise_std,
            box_radius,
            lipschitz_grad,
            lipschitz_hess: 0.0,
            optimum_value: inner_value,
            optimum_point,
        })
    }

    pub fn strict_saddle_2d(noise_std: f64, box_radius: f64) -> Result<Self> {
        if noise_std < 0.0 || box_radius <= 0.0 {
            return Err(ZoError::contract("strict_saddle_2d: noise_std >= 0 and box_radius > 0 required"));
        }
        let r = box_radius;
        Ok(ProblemSpec {
            family: ProblemFamily::StrictSaddle2d,
            dimension: 2,
            noise_std,
            box_radius: r,
            // Hessian is diag(3x^2 - 1, 1): on |x| <= r the top curvature is
            // max(3r^2 - 1, 1) and the third derivative 6x is bounded by 6r.
            lipschitz_grad: (3.0 * r * r - 1.0).max(1.0),
            lipschitz_hess: 6.0 * r,
            optimum_value: Some(-0.25),
            optimum_point: Some(Array1::from(vec![1.0, 0.0])),
        })
    }

    pub fn least_squares(a: Array2<f64>, b: Array1<f64>, noise_std: f64, box_radius: f64) -> Result<Self> {
        let (n, d) = (a.nrows(), a.ncols());
        if b.len() != n {
            return Err(ZoError::DimensionMismatch { expected: n, got: b.len() });
        }
        if noise_std < 0.0 || box_radius <= 0.0 {
            return Err(ZoError::contract("least_squares: noise_std >= 0 and box_radius > 0 required"));
        }
        let gram = a.t().dot(&a);
        let lipschitz_grad = linalg::symmetric_operator_norm(&gram.view())?;
        let atb = a.t().dot(&b);
        let (optimum_value, optimum_point) = match linalg::cholesky_solve(&gram.view(), &atb.view()) {
            Some(xstar) => {
                let resid = a.dot(&xstar) - &b;
                (Some(0.5 * resid.dot(&resid)), Some(xstar))
            }
            None => (None, None),
        };
        Ok(ProblemSpec {
            family: ProblemFamily::LeastSquares { a, b },
            dimension: d,
            noise_std,
            box_radius,
            lipschitz_grad,
            lipschitz_hess: 0.0,
            optimum_value,
            optimum_point,
        })
    }

    pub fn family(&self) -> &ProblemFamily {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    /// Radius of the box the reference constants were computed on.
    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    /// Gradient Lipschitz constant `L` (Euclidean, on the reference box).
    pub fn lipschitz_grad(&self) -> f64 {
        self.lipschitz_grad
    }

    /// Hessian Lipschitz constant `L_H` (zero for quadratic families).
    pub fn lipschitz_hess(&self) -> f64 {
        self.lipschitz_hess
    }

    /// Unconstrained optimum value when the family admits one in closed form.
    pub fn optimum_value(&self) -> Option<f64> {
        self.optimum_value
    }

    pub fn optimum_point(&self) -> Option<&Array1<f64>> {
        self.optimum_point.as_ref()
    }

    /// Support size for sparse families, ambient dimension otherwise.
    pub fn gradient_sparsity(&self) -> usize {
        match &self.family {
            ProblemFamily::SparseSupport { support, .. } => support.len(),
            _ => self.dimension,
        }
    }

    /// Upper bound on `|grad f(x)|_2` over `|x|_2 <= max_point_norm`.
    pub fn gradient_norm_bound(&self, max_point_norm: f64) -> f64 {
        let r = max_point_norm;
        match &self.family {
            ProblemFamily::Quadratic { c, .. } => self.lipschitz_grad * r + c.dot(c).sqrt(),
            ProblemFamily::SparseSupport { c, .. } => self.lipschitz_grad * r + c.dot(c).sqrt(),
            ProblemFamily::StrictSaddle2d => {
                let cubic = r * r * r + r;
                (cubic * cubic + r * r).sqrt()
            }
            ProblemFamily::LeastSquares { a, b } => {
                let atb = a.t().dot(b);
                self.lipschitz_grad * r + atb.dot(&atb).sqrt()
            }
        }
    }

    /// Noiseless objective value. Internal: all public access goes through
    /// the counting oracle or the reference derivatives.
    fn f(&self, x: &ArrayView1<'_, f64>) -> f64 {
        match &self.family {
            ProblemFamily::Quadratic { a, c } => 0.5 * x.dot(&a.dot(x)) + c.dot(x),
            ProblemFamily::SparseSupport { support, a, c } => {
                let xs = Array1::from_iter(support.iter().map(|&i| x[i]));
                0.5 * xs.dot(&a.dot(&xs)) + c.dot(&xs)
            }
            ProblemFamily::StrictSaddle2d => {
                let (u, v) = (x[0], x[1]);
                0.25 * u.powi(4) - 0.5 * u * u + 0.5 * v * v
            }
            ProblemFamily::LeastSquares { a, b } => {
                let r = a.dot(x) - b;
                0.5 * r.dot(&r)
            }
        }
    }
}

/// Exact gradient of the noiseless objective. Verification only; does not
/// count as an oracle call.
pub fn reference_gradient(problem: &ProblemSpec, x: &ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    ensure_dim(x, problem.dimension)?;
    ensure_finite(x, "reference_gradient")?;
    Ok(match &problem.family {
        ProblemFamily::Quadratic { a, c } => a.dot(x) + c,
        ProblemFamily::SparseSupport { support, a, c } => {
            let xs = Array1::from_iter(support.iter().map(|&i| x[i]));
            let gs = a.dot(&xs) + c;
            let mut g = Array1::zeros(problem.dimension);
            for (slot, &i) in support.iter().enumerate() {
                g[i] = gs[slot];
            }
            g
        }
        ProblemFamily::StrictSaddle2d => {
            let (u, v) = (x[0], x[1]);
            Array1::from(vec![u.powi(3) - u, v])
        }
        ProblemFamily::LeastSquares { a, b } => {
            let r = a.dot(x) - b;
            a.t().dot(&r)
        }
    })
}

/// Exact dense Hessian of the noiseless objective. Verification only.
/// Limited to `d <= 512`; larger problems never need the dense form.
pub fn reference_hessian(problem: &ProblemSpec, x: &ArrayView1<'_, f64>) -> Result<Array2<f64>> {
    ensure_dim(x, problem.dimension)?;
    ensure_finite(x, "reference_hessian")?;
    let d = problem.dimension;
    if d > 512 {
        return Err(ZoError::NotAvailable(format!(
            "reference_hessian limited to d <= 512, got {d}"
        )));
    }
    Ok(match &problem.family {
        ProblemFamily::Quadratic { a, .. } => a.clone(),
        ProblemFamily::SparseSupport { support, a, .. } => {
            let mut h = Array2::zeros((d, d));
            for (si, &i) in support.iter().enumerate() {
                for (sj, &j) in support.iter().enumerate() {
                    h[[i, j]] = a[[si, sj]];
                }
            }
            h
        }
        ProblemFamily::StrictSaddle2d => {
            let u = x[0];
            let mut h = Array2::zeros((2, 2));
            h[[0, 0]] = 3.0 * u * u - 1.0;
            h[[1, 1]] = 1.0;
            h
        }
        ProblemFamily::LeastSquares { a, .. } => a.t().dot(a),
    })
}

/// Counting, noise-injecting view of a problem. One per run.
#[derive(Debug)]
pub struct ZeroOrderOracle<'a> {
    problem: &'a ProblemSpec,
    calls: Cell<u64>,
}

impl<'a> ZeroOrderOracle<'a> {
    pub fn new(problem: &'a ProblemSpec) -> Self {
        ZeroOrderOracle { problem, calls: Cell::new(0) }
    }

    pub fn problem(&self) -> &ProblemSpec {
        self.problem
    }

    /// `F(x, xi) = f(x) + tau * xi`, with `xi ~ N(0,1)` drawn from `rng` per
    /// call (no draw when `tau = 0`). Counts one oracle call.
    pub fn evaluate(&self, x: &ArrayView1<'_, f64>, rng: &mut SeededStream) -> Result<f64> {
        ensure_dim(x, self.problem.dimension)?;
        ensure_finite(x, "evaluate")?;
        let mut value = self.problem.f(x);
        if self.problem.noise_std > 0.0 {
            value += self.problem.noise_std * rng.gaussian();
        }
        self.calls.set(self.calls.get() + 1);
        Ok(value)
    }

    /// Noiseless objective value, bypassing noise and accounting. Used by
    /// verification metrics (`f(x) - f*` columns), never by solvers.
    pub fn value_reference(&self, x: &ArrayView1<'_, f64>) -> Result<f64> {
        ensure_dim(x, self.problem.dimension)?;
        ensure_finite(x, "value_reference")?;
        Ok(self.problem.f(x))
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    pub fn reset_calls(&self) {
        self.calls.set(0);
    }
}

/// Noiseless objective value straight off the spec (test/metric helper).
pub fn objective_value(problem: &ProblemSpec, x: &ArrayView1<'_, f64>) -> Result<f64> {
    ensure_dim(x, problem.dimension)?;
    ensure_finite(x, "objective_value")?;
    Ok(problem.f(x))
}

// ---------------------------------------------------------------------------
// JSON problem configs
// ---------------------------------------------------------------------------

/// On-disk problem description.
///
/// ```json
/// {
///   "family": "quadratic",
///   "dimension": 20,
///   "parameters": {"matrix": {"diag": [1.0, 2.0]}, "linear": [0.0, 0.0]},
///   "noise_std": 0.01,
///   "box_radius": 2.0,
///   "seed": 7
/// }
/// ```
///
/// `matrix` accepts `"identity"`, `{"diag": [...]}`, `{"dense": [[...]]}`, or
/// `{"random_psd": {"eig_min": a, "eig_max": b}}` (requires `seed`).
#[derive(Debug, Clone, Deserialize)]
pub struct ProblemConfig {
    pub family: String,
    pub dimension: usize,
    #[serde(default)]
    pub parameters: serde_json::Value,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default = "default_box_radius")]
    pub box_radius: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_box_radius() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum MatrixParam {
    Named(String),
    Structured {
        #[serde(default)]
        diag: Option<Vec<f64>>,
        #[serde(default)]
        dense: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        random_psd: Option<RandomPsd>,
    },
}

#[derive(Debug, Clone, Deserialize)]
struct RandomPsd {
    eig_min: f64,
    eig_max: f64,
}

fn build_matrix(param: &serde_json::Value, d: usize, seed: Option<u64>, key: &str) -> Result<Array2<f64>> {
    if param.is_null() {
        return Ok(Array2::eye(d));
    }
    let parsed: MatrixParam = serde_json::from_value(param.clone())
        .map_err(|e| ZoError::config(format!("parameters.{key}: {e}")))?;
    match parsed {
        MatrixParam::Named(name) if name == "identity" => Ok(Array2::eye(d)),
        MatrixParam::Named(name) => Err(ZoError::config(format!(
            "parameters.{key}: unknown matrix kind '{name}'"
        ))),
        MatrixParam::Structured { diag: Some(v), .. } => {
            if v.len() != d {
                return Err(ZoError::config(format!(
                    "parameters.{key}.diag: expected {d} entries, got {}",
                    v.len()
                )));
            }
            Ok(Array2::from_diag(&Array1::from(v)))
        }
        MatrixParam::Structured { dense: Some(rows), .. } => {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(ZoError::config(format!(
                    "parameters.{key}.dense: expected a {d}x{d} matrix"
                )));
            }
            let mut a = Array2::zeros((d, d));
            for (i, row) in rows.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    a[[i, j]] = v;
                }
            }
            Ok(a)
        }
        MatrixParam::Structured { random_psd: Some(spec), .. } => {
            let seed = seed.ok_or_else(|| {
                ZoError::config(format!("parameters.{key}.random_psd requires a problem seed"))
            })?;
            if !(spec.eig_min > 0.0 && spec.eig_max >= spec.eig_min) {
                return Err(ZoError::config(format!(
                    "parameters.{key}.random_psd: need 0 < eig_min <= eig_max"
                )));
            }
            Ok(random_psd_matrix(d, spec.eig_min, spec.eig_max, seed))
        }
        MatrixParam::Structured { .. } => Err(ZoError::config(format!(
            "parameters.{key}: provide one of diag/dense/random_psd"
        ))),
    }
}

/// Deterministic PSD matrix with eigenvalues spread linearly over
/// `[eig_min, eig_max]`, mixed by two Householder reflections.
pub fn random_psd_matrix(d: usize, eig_min: f64, eig_max: f64, seed: u64) -> Array2<f64> {
    let mut rng = SeededStream::new(seed);
    let eigs: Vec<f64> = (0..d)
        .map(|i| {
            if d == 1 {
                eig_max
            } else {
                eig_min + (eig_max - eig_min) * i as f64 / (d - 1) as f64
            }
        })
        .collect();
    let mut a = Array2::from_diag(&Array1::from(eigs));
    for _ in 0..2 {
        let mut v = rng.gaussian_vec(d);
        let norm = v.dot(&v).sqrt();
        if norm < 1e-12 {
            continue;
        }
        v.mapv_inplace(|t| t / norm);
        // H = I - 2vv'; A <- H A H keeps symmetry and the spectrum.
        let av = a.dot(&v);
        let vav = v.dot(&av);
        // H A H = A - 2 v (Av)' - 2 (Av) v' + 4 (v'Av) v v'
        for i in 0..d {
            for j in 0..d {
                a[[i, j]] += -2.0 * v[i] * av[j] - 2.0 * av[i] * v[j] + 4.0 * vav * v[i] * v[j];
            }
        }
    }
    // Clean up asymmetry from rounding.
    for i in 0..d {
        for j in (i + 1)..d {
            let m = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = m;
            a[[j, i]] = m;
        }
    }
    a
}

fn build_linear(param: &serde_json::Value, d: usize, key: &str) -> Result<Array1<f64>> {
    if param.is_null() {
        return Ok(Array1::zeros(d));
    }
    let v: Vec<f64> = serde_json::from_value(param.clone())
        .map_err(|e| ZoError::config(format!("parameters.{key}: {e}")))?;
    if v.len() != d {
        return Err(ZoError::config(format!(
            "parameters.{key}: expected {d} entries, got {}",
            v.len()
        )));
    }
    Ok(Array1::from(v))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SupportParam {
    Explicit(Vec<usize>),
    First { first: usize },
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemSpec> {
        let d = self.dimension;
        if d == 0 {
            return Err(ZoError::config("dimension: must be positive"));
        }
        let params = &self.parameters;
        match self.family.as_str() {
            "quadratic" => {
                let a = build_matrix(&params["matrix"], d, self.seed, "matrix")?;
                let c = build_linear(&params["linear"], d, "linear")?;
                ProblemSpec::quadratic(a, c, self.noise_std, self.box_radius)
            }
            "sparse_support" => {
                let support = match &params["support"] {
                    serde_json::Value::Null => {
                        return Err(ZoError::config("parameters.support: required for sparse_support"))
                    }
                    v => serde_json::from_value::<SupportParam>(v.clone())
                        .map_err(|e| ZoError::config(format!("parameters.support: {e}")))?,
                };
                let support = match support {
                    SupportParam::Explicit(idx) => idx,
                    SupportParam::First { first } => (0..first).collect(),
                };
                let s = support.len();
                let a = build_matrix(&params["matrix"], s, self.seed, "matrix")?;
                let c = build_linear(&params["linear"], s, "linear")?;
                ProblemSpec::sparse_support(d, support, a, c, self.noise_std, self.box_radius)
            }
            "strict_saddle_2d" => {
                if d != 2 {
                    return Err(ZoError::config("dimension: strict_saddle_2d requires dimension = 2"));
                }
                ProblemSpec::strict_saddle_2d(self.noise_std, self.box_radius)
            }
            "least_squares" => {
                let rows: Vec<Vec<f64>> = serde_json::from_value(params["matrix"].clone())
                    .map_err(|e| ZoError::config(format!("parameters.matrix: {e}")))?;
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != d) {
                    return Err(ZoError::config(format!(
                        "parameters.matrix: expected n x {d} rows"
                    )));
                }
                let mut a = Array2::zeros((n, d));
                for (i, row) in rows.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        a[[i, j]] = v;
                    }
                }
                let b: Vec<f64> = serde_json::from_value(params["target"].clone())
                    .map_err(|e| ZoError::config(format!("parameters.target: {e}")))?;
                ProblemSpec::least_squares(a, Array1::from(b), self.noise_std, self.box_radius)
            }
            other => Err(ZoError::Config(format!("family: unknown family '{other}'"))),
        }
    }
}

/// Parses a problem spec from JSON text.
pub fn problem_from_json(text: &str) -> Result<ProblemSpec> {
    let cfg: ProblemConfig = serde_json::from_str(text)?;
    cfg.build()
}
