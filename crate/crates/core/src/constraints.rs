//! Feasible sets and the operations solvers need on them.
//!
//! Every set supports two primitives:
//!
//! * a linear minimization oracle [`lmo`]: `argmin_{v in X} <g, v>`, always a
//!   vertex, with deterministic lowest-index tie-breaking;
//! * a Euclidean projection [`project`], exact for all four set kinds.
//!
//! On top of those sit the Frank-Wolfe gap, the exact proximal step
//! `argmin_u <g,u> + (gamma/2)|u - x|^2 = project(x - g/gamma)`, the gradient
//! mapping `gamma (x - prox)`, and [`icg`]: a conditional-gradient inner loop
//! that solves the proximal subproblem inexactly but returns a point whose
//! first-order optimality residual is certified to be at least `-mu`.

use crate::error::{ensure_dim, ensure_finite, Result, ZoError};
use crate::oracle::{reference_gradient, ProblemSpec};
use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

/// Supported feasible sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSet {
    /// `{ x : |x|_1 <= radius }`
    L1Ball { dimension: usize, radius: f64 },
    /// `{ x : |x|_2 <= radius }`
    L2Ball { dimension: usize, radius: f64 },
    /// `{ x : lo_i <= x_i <= hi_i }`
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `{ x : x_i >= 0, sum x_i = radius }`
    Simplex { dimension: usize, radius: f64 },
}

impl ConstraintSet {
    pub fn l1_ball(dimension: usize, radius: f64) -> Result<Self> {
        Self::check_radius(dimension, radius)?;
        Ok(ConstraintSet::L1Ball { dimension, radius })
    }

    pub fn l2_ball(dimension: usize, radius: f64) -> Result<Self> {
        Self::check_radius(dimension, radius)?;
        Ok(ConstraintSet::L2Ball { dimension, radius })
    }

    pub fn simplex(dimension: usize, radius: f64) -> Result<Self> {
        Self::check_radius(dimension, radius)?;
        Ok(ConstraintSet::Simplex { dimension, radius })
    }

    /// Box with the given per-coordinate bounds.
    pub fn hyper_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(ZoError::contract("box: lo and hi must be equal-length and nonempty"));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(ZoError::contract("box: need finite lo <= hi per coordinate"));
            }
        }
        Ok(ConstraintSet::Box { lo, hi })
    }

    /// Symmetric box `[-r, r]^d`.
    pub fn symmetric_box(dimension: usize, r: f64) -> Result<Self> {
        Self::check_radius(dimension, r)?;
        Self::hyper_box(vec![-r; dimension], vec![r; dimension])
    }

    fn check_radius(dimension: usize, radius: f64) -> Result<()> {
        if dimension == 0 {
            return Err(ZoError::contract("constraint set: dimension must be positive"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(ZoError::contract("constraint set: radius must be positive and finite"));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        match self {
            ConstraintSet::L1Ball { dimension, .. }
            | ConstraintSet::L2Ball { dimension, .. }
            | ConstraintSet::Simplex { dimension, .. } => *dimension,
            ConstraintSet::Box { lo, .. } => lo.len(),
        }
    }

    /// Euclidean diameter `max_{x,y in X} |x - y|_2`.
    pub fn diameter(&self) -> f64 {
        match self {
            ConstraintSet::L1Ball { radius, .. } | ConstraintSet::L2Ball { radius, .. } => {
                2.0 * radius
            }
            // Farthest vertex pair is r e_i, r e_j.
            ConstraintSet::Simplex { radius, .. } => radius * 2.0f64.sqrt(),
            ConstraintSet::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| (h - l) * (h - l))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Largest Euclidean norm of a feasible point (used for gradient bounds).
    pub fn max_point_norm(&self) -> f64 {
        match self {
            ConstraintSet::L1Ball { radius, .. }
            | ConstraintSet::L2Ball { radius, .. }
            | ConstraintSet::Simplex { radius, .. } => *radius,
            ConstraintSet::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Membership test with additive tolerance.
    pub fn contains(&self, x: &ArrayView1<'_, f64>, tol: f64) -> bool {
        if x.len() != self.dimension() {
            return false;
        }
        match self {
            ConstraintSet::L1Ball { radius, .. } => {
                x.iter().map(|v| v.abs()).sum::<f64>() <= radius + tol
            }
            ConstraintSet::L2Ball { radius, .. } => x.dot(x).sqrt() <= radius + tol,
            ConstraintSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            ConstraintSet::Simplex { radius, .. } => {
                x.iter().all(|v| *v >= -tol) && (x.sum() - radius).abs() <= tol
            }
        }
    }

    /// A deterministic feasible starting point: the projection of the origin.
    pub fn default_start(&self) -> Array1<f64> {
        let d = self.dimension();
        project(self, &Array1::zeros(d).view()).expect("projection of origin")
    }
}

/// Linear minimization oracle: `argmin_{v in X} <g, v>`, a vertex of the set.
///
/// Ties break toward the lowest coordinate index; the all-zero gradient on
/// ball sets returns the `-r e_0` vertex (every vertex ties), and a zero
/// coordinate of `g` on a box picks the lower bound. Deterministic by
/// construction.
pub fn lmo(set: &ConstraintSet, g: &ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let d = set.dimension();
    ensure_dim(g, d)?;
    ensure_finite(g, "lmo")?;
    Ok(match set {
        ConstraintSet::L1Ball { radius, .. } => {
            let mut best = 0usize;
            for i in 1..d {
                if g[i].abs() > g[best].abs() {
                    best = i;
                }
            }
            let mut v = Array1::zeros(d);
            v[best] = if g[best] > 0.0 { -radius } else if g[best] < 0.0 { *radius } else { -radius };
            v
        }
        ConstraintSet::L2Ball { radius, .. } => {
            let norm = g.dot(g).sqrt();
            if norm == 0.0 {
                let mut v = Array1::zeros(d);
                v[0] = -radius;
                v
            } else {
                g.mapv(|t| -radius * t / norm)
            }
        }
        ConstraintSet::Box { lo, hi } => Array1::from_iter(
            g.iter()
                .zip(lo.iter().zip(hi))
                .map(|(gi, (l, h))| if *gi < 0.0 { *h } else { *l }),
        ),
        ConstraintSet::Simplex { radius, .. } => {
            let mut best = 0usize;
            for i in 1..d {
                if g[i] < g[best] {
                    best = i;
                }
            }
            let mut v = Array1::zeros(d);
            v[best] = *radius;
            v
        }
    })
}

/// Exact Euclidean projection onto the set.
pub fn project(set: &ConstraintSet, y: &ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let d = set.dimension();
    ensure_dim(y, d)?;
    ensure_finite(y, "project")?;
    Ok(match set {
        ConstraintSet::L2Ball { radius, .. } => {
            let norm = y.dot(y).sqrt();
            if norm <= *radius {
                y.to_owned()
            } else {
                y.mapv(|t| t * radius / norm)
            }
        }
        ConstraintSet::Box { lo, hi } => Array1::from_iter(
            y.iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.max(*l).min(*h)),
        ),
        ConstraintSet::Simplex { radius, .. } => project_simplex(y, *radius),
        ConstraintSet::L1Ball { radius, .. } => {
            let l1: f64 = y.iter().map(|v| v.abs()).sum();
            if l1 <= *radius {
                y.to_owned()
            } else {
                // Project |y| onto the simplex of the same radius, restore signs.
                let abs = y.mapv(f64::abs);
                let p = project_simplex(&abs.view(), *radius);
                Array1::from_iter(y.iter().zip(p.iter()).map(|(v, p)| p * v.signum()))
            }
        }
    })
}

/// Water-filling projection onto `{ x >= 0, sum x = r }` (sort, then clip at
/// the largest feasible threshold).
fn project_simplex(y: &ArrayView1<'_, f64>, r: f64) -> Array1<f64> {
    let mut sorted: Vec<f64> = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = (sorted.iter().sum::<f64>() - r) / sorted.len() as f64;
    for (j, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - r) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    y.mapv(|v| (v - theta).max(0.0))
}

/// Frank-Wolfe gap at `x`: `<grad f(x), x - argmin_{v in X} <grad f(x), v>>`.
///
/// Verification metric; uses the exact reference gradient of the noiseless
/// objective, so it costs no oracle calls. Nonnegative for feasible `x`, zero
/// exactly at constrained stationary points, and on convex objectives it
/// upper-bounds `f(x) - f*`.
pub fn fw_gap(problem: &ProblemSpec, set: &ConstraintSet, x: &ArrayView1<'_, f64>) -> Result<f64> {
    if set.dimension() != problem.dimension() {
        return Err(ZoError::DimensionMismatch {
            expected: problem.dimension(),
            got: set.dimension(),
        });
    }
    let g = reference_gradient(problem, x)?;
    let v = lmo(set, &g.view())?;
    Ok(g.dot(x) - g.dot(&v))
}

/// Exact proximal step: `argmin_{u in X} <g, u> + (gamma/2) |u - x|^2`,
/// computed as `project(x - g / gamma)`.
pub fn prox_exact(
    set: &ConstraintSet,
    x: &ArrayView1<'_, f64>,
    g: &ArrayView1<'_, f64>,
    gamma: f64,
) -> Result<Array1<f64>> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(ZoError::contract("prox_exact: gamma must be positive"));
    }
    ensure_dim(x, set.dimension())?;
    ensure_dim(g, set.dimension())?;
    ensure_finite(x, "prox_exact")?;
    ensure_finite(g, "prox_exact")?;
    let target = Array1::from_iter(x.iter().zip(g.iter()).map(|(xi, gi)| xi - gi / gamma));
    project(set, &target.view())
}

/// Gradient mapping `gamma * (x - prox_exact(set, x, g, gamma))`: the
/// constrained stationarity residual associated with step size `1/gamma`.
pub fn gradient_mapping(
    set: &ConstraintSet,
    x: &ArrayView1<'_, f64>,
    g: &ArrayView1<'_, f64>,
    gamma: f64,
) -> Result<Array1<f64>> {
    let p = prox_exact(set, x, g, gamma)?;
    Ok(Array1::from_iter(
        x.iter().zip(p.iter()).map(|(xi, pi)| gamma * (xi - pi)),
    ))
}

/// Parameters for the inexact conditional-gradient subsolver.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IcgParams {
    /// Proximal curvature `gamma > 0`.
    pub gamma: f64,
    /// Termination slack `mu >= 0`; the returned point satisfies
    /// `<g + gamma(p - x), u - p> >= -mu` for all feasible `u`.
    pub mu: f64,
    /// Inner-iteration cap.
    pub max_iters: usize,
}

impl IcgParams {
    /// Default cap `10 * ceil(gamma * D^2 / mu)`: ten times the iteration
    /// count at which the conditional-gradient rate `gamma D^2 / t` reaches
    /// `mu`. With `mu = 0` the rate argument gives no finite bound, so a
    /// fixed cap of `10^6` applies.
    pub fn new(set: &ConstraintSet, gamma: f64, mu: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(ZoError::contract("icg: gamma must be positive"));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(ZoError::contract("icg: mu must be nonnegative"));
        }
        let d2 = set.diameter().powi(2);
        let max_iters = if mu > 0.0 {
            let bound = (gamma * d2 / mu).ceil();
            if bound.is_finite() {
                (10.0 * bound).min(1e7) as usize
            } else {
                10_000_000
            }
        } else {
            1_000_000
        };
        Ok(IcgParams { gamma, mu, max_iters: max_iters.max(1) })
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters.max(1);
        self
    }
}

/// Output of [`icg`].
#[derive(Debug, Clone)]
pub struct IcgOutput {
    /// The accepted point `p` (feasible by construction).
    pub point: Array1<f64>,
    /// Linear minimizations performed.
    pub lmo_calls: u64,
    /// Inner iterations before the certificate fired.
    pub iterations: usize,
    /// Certified lower bound on `min_u <g + gamma(p - x), u - p>`; always
    /// `>= -mu` on success.
    pub certificate: f64,
}

/// Inexact conditional gradient for the proximal subproblem
/// `min_{u in X} <g, u> + (gamma/2)|u - x|^2`.
///
/// Runs Frank-Wolfe with step `2/(t+1)` on the subproblem objective and stops
/// as soon as the subproblem's own Frank-Wolfe gap at the current point is at
/// most `mu`, which is precisely the inexactness certificate the outer
/// solvers need. The distance to the exact prox obeys `|p - prox|^2 <= mu /
/// gamma`. Only linear minimizations touch the set; nothing here consumes
/// oracle calls or randomness.
pub fn icg(
    set: &ConstraintSet,
    x: &ArrayView1<'_, f64>,
    g: &ArrayView1<'_, f64>,
    params: &IcgParams,
) -> Result<IcgOutput> {
    let d = set.dimension();
    ensure_dim(x, d)?;
    ensure_dim(g, d)?;
    ensure_finite(x, "icg")?;
    ensure_finite(g, "icg")?;
    if !(params.gamma.is_finite() && params.gamma > 0.0) {
        return Err(ZoError::contract("icg: gamma must be positive"));
    }
    if !(params.mu.is_finite() && params.mu >= 0.0) {
        return Err(ZoError::contract("icg: mu must be nonnegative"));
    }

    let mut current = x.to_owned();
    if !set.contains(&current.view(), 1e-9) {
        current = project(set, x)?;
    }
    let mut lmo_calls = 0u64;
    let mut last_h = f64::NEG_INFINITY;
    for t in 1..=params.max_iters {
        // Gradient of the subproblem objective at the current point.
        let sub_grad = Array1::from_iter(
            g.iter()
                .zip(current.iter().zip(x.iter()))
                .map(|(gi, (ci, xi))| gi + params.gamma * (ci - xi)),
        );
        let vertex = lmo(set, &sub_grad.view())?;
        lmo_calls += 1;
        let h = sub_grad.dot(&vertex) - sub_grad.dot(&current);
        last_h = h;
        if h >= -params.mu {
            return Ok(IcgOutput {
                point: current,
                lmo_calls,
                iterations: t - 1,
                certificate: h,
            });
        }
        let step = 2.0 / (t as f64 + 1.0);
        for i in 0..d {
            current[i] = (1.0 - step) * current[i] + step * vertex[i];
        }
    }
    Err(ZoError::IterationBudget {
        context: "icg",
        iterations: params.max_iters,
        residual: -last_h,
        best: current.to_vec(),
    })
}
