//! Zeroth-order stochastic optimization.
//!
//! Everything here works from function evaluations alone: gradients are
//! estimated by Gaussian-smoothing finite differences, Hessians by a
//! rank-structured second-difference estimator, and the solvers consume
//! those estimates through conditional-gradient, projected, truncated, and
//! cubic-regularized update rules.
//!
//! The crate is organized around the lifecycle of an experiment:
//!
//! * [`oracle`]: noisy function-value oracles over a few analytic test
//!   families, with exact reference gradients/Hessians for verification.
//! * [`estimators`]: two-point gradient estimates and structured Hessian
//!   estimates built from oracle calls.
//! * [`constraints`]: feasible sets with linear minimization oracles,
//!   Euclidean projections, and an inexact conditional-gradient routine for
//!   proximal subproblems.
//! * [`cg_solvers`]: conditional-gradient and inexact projected solvers for
//!   constrained problems.
//! * [`highdim`]: coordinate-sparse gradient methods whose guarantees
//!   degrade only poly-logarithmically with ambient dimension.
//! * [`cubic`]: a stochastic cubic-regularized Newton method that escapes
//!   strict saddle points using estimated curvature.
//! * [`harness`]: seeded experiment configs, trace/summary CSV output, and
//!   trend checks over grids of iteration budgets.
//!
//! Every randomized routine takes a [`SeededStream`]; equal seeds produce
//! byte-identical run records.

pub mod constraints;
pub mod cg_solvers;
pub mod cubic;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod highdim;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod trace;

pub use constraints::{ConstraintSet, IcgOutput, IcgParams};
pub use cg_solvers::{
    AcceleratedSchedule, InexactZsgdSchedule, OutputRule, RunOptions, ZscgSchedule,
};
pub use cubic::{
    min_scalar_cubic, second_order_criterion, solve_cubic_subproblem, zscrn, CubicCertificate,
    CubicModel, CubicParams,
};
pub use error::{Result, ZoError};
pub use estimators::{GradientEstimate, NormMode, SmoothingParams, StructuredHessian};
pub use harness::{
    run_experiment, trend_check, validate_estimators, CheckResult, CriterionStats,
    ExperimentConfig, ExperimentOptions, ExperimentReport, RunFailure, ScheduleConfig, SummaryRow,
    TrendReport,
};
pub use highdim::HighDimSchedule;
pub use oracle::{ProblemSpec, ZeroOrderOracle};
pub use rng::SeededStream;
pub use trace::{RunRecord, TraceRow};

/// Dense decision vector. Solvers and estimators operate on `f64` coordinates.
pub type DecisionVector = ndarray::Array1<f64>;
