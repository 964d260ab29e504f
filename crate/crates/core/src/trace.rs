//! Convergence traces and run records.
//!
//! Every solver emits one [`TraceRow`] per logged iteration. Rows always
//! carry the iteration index and cumulative oracle-call count; the metric
//! columns are filled per algorithm family (see [`TraceColumns`]). The last
//! row of a record always describes the point the solver returned, so summary
//! statistics can be recomputed from trace files alone.

use crate::constraints::{fw_gap, gradient_mapping, ConstraintSet};
use crate::error::Result;
use crate::oracle::{objective_value, reference_gradient, ProblemSpec};
use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// One logged iteration.
///
/// `None` metrics are outside the algorithm's column set and render as empty
/// CSV cells. Metrics are computed against the noiseless reference objective
/// and never consume oracle calls or solver randomness.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct TraceRow {
    /// Iteration index (0 = initial point).
    pub k: u64,
    /// Cumulative zeroth-order oracle calls at the time of logging.
    pub calls: u64,
    /// Cumulative linear-minimization calls (conditional-gradient family).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lmo_calls: Option<u64>,
    /// Frank-Wolfe gap at the iterate (constrained runs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fw_gap: Option<f64>,
    /// Euclidean norm of the gradient mapping (gradient norm when
    /// unconstrained).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gp_norm: Option<f64>,
    /// `f(x_k) - f*` when the optimum is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_gap: Option<f64>,
    /// Squared l1 norm of the reference gradient (sparse runs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_l1_sq: Option<f64>,
    /// Nonzero count of the iterate (sparse runs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nnz: Option<u64>,
    /// Smallest Hessian eigenvalue at the iterate (cubic runs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    /// Model decrease achieved by the accepted cubic step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_decrease: Option<f64>,
    /// Iterations spent inside the cubic subproblem solver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsolver_iters: Option<u64>,
}

/// Column set for a trace file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceColumns {
    /// `k, calls, fw_gap, gp_norm, f_gap`
    Standard,
    /// `k, calls, fw_gap, gp_norm, f_gap, grad_l1_sq, nnz`
    HighDim,
    /// `k, calls, fw_gap, gp_norm, f_gap, lambda_min, model_decrease, subsolver_iters`
    Cubic,
}

impl TraceColumns {
    pub fn header(&self) -> &'static str {
        match self {
            TraceColumns::Standard => "k,calls,fw_gap,gp_norm,f_gap",
            TraceColumns::HighDim => "k,calls,fw_gap,gp_norm,f_gap,grad_l1_sq,nnz",
            TraceColumns::Cubic => {
                "k,calls,fw_gap,gp_norm,f_gap,lambda_min,model_decrease,subsolver_iters"
            }
        }
    }

    fn format_row(&self, row: &TraceRow) -> String {
        fn cell(v: Option<f64>) -> String {
            match v {
                Some(x) if x.is_finite() => format!("{x}"),
                _ => String::new(),
            }
        }
        fn ucell(v: Option<u64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let base = format!(
            "{},{},{},{},{}",
            row.k,
            row.calls,
            cell(row.fw_gap),
            cell(row.gp_norm),
            cell(row.f_gap)
        );
        match self {
            TraceColumns::Standard => base,
            TraceColumns::HighDim => {
                format!("{base},{},{}", cell(row.grad_l1_sq), ucell(row.nnz))
            }
            TraceColumns::Cubic => format!(
                "{base},{},{},{}",
                cell(row.lambda_min),
                cell(row.model_decrease),
                ucell(row.subsolver_iters)
            ),
        }
    }
}

/// Full record of one solver run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    /// Algorithm identifier as used in configs.
    pub algorithm: String,
    /// Run seed.
    pub seed: u64,
    /// Echo of the resolved schedule (step sizes, batch sizes, smoothing).
    pub schedule: serde_json::Value,
    /// Column set the rows populate.
    pub columns: TraceColumns,
    /// Logged iterations; the last row describes `output_point`.
    pub rows: Vec<TraceRow>,
    /// Index `R` of the returned iterate for randomized-output algorithms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_index: Option<u64>,
    /// Oracle calls spent inside gradient estimates.
    pub gradient_oracle_calls: u64,
    /// Oracle calls spent inside Hessian estimates.
    pub hessian_oracle_calls: u64,
    /// Total linear-minimization calls.
    pub lmo_calls: u64,
    /// The point the solver returned.
    pub output_point: Vec<f64>,
}

impl RunRecord {
    /// The row describing the returned point.
    pub fn final_row(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Total oracle calls (gradient plus Hessian estimates).
    pub fn oracle_calls(&self) -> u64 {
        self.gradient_oracle_calls + self.hessian_oracle_calls
    }

    /// Write the trace as CSV with the record's column set.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.columns.header())?;
        for row in &self.rows {
            writeln!(w, "{}", self.columns.format_row(row))?;
        }
        Ok(())
    }

    pub fn trace_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_trace_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Fills the standard metric columns of a row from the noiseless reference
/// objective. `set = None` means unconstrained: `fw_gap` stays empty and
/// `gp_norm` is the plain gradient norm. `gamma` is the curvature used for
/// the gradient mapping; callers pass the algorithm's own step curvature when
/// it has one and the problem's gradient Lipschitz constant otherwise.
///
/// Costs no oracle calls and no solver randomness.
pub(crate) fn fill_standard_metrics(
    row: &mut TraceRow,
    problem: &ProblemSpec,
    set: Option<&ConstraintSet>,
    x: &ArrayView1<'_, f64>,
    gamma: f64,
) -> Result<()> {
    let grad = reference_gradient(problem, x)?;
    match set {
        Some(set) => {
            row.fw_gap = Some(fw_gap(problem, set, x)?);
            let gm = gradient_mapping(set, x, &grad.view(), gamma)?;
            row.gp_norm = Some(gm.dot(&gm).sqrt());
        }
        None => {
            row.gp_norm = Some(grad.dot(&grad).sqrt());
        }
    }
    if let Some(f_star) = problem.optimum_value() {
        row.f_gap = Some(objective_value(problem, x)? - f_star);
    }
    Ok(())
}

/// Which iterations to log.
///
/// Small runs log every iteration; long runs log about a hundred
/// geometrically spaced indices so trace files stay compact while log-log
/// slopes remain readable. Index 0 and the final index are always included.
#[derive(Debug, Clone)]
pub struct TraceCadence {
    total: u64,
    points: Option<std::collections::BTreeSet<u64>>,
}

impl TraceCadence {
    pub const DENSE_LIMIT: u64 = 1_000;

    pub fn new(total_iterations: u64) -> Self {
        if total_iterations <= Self::DENSE_LIMIT {
            return TraceCadence { total: total_iterations, points: None };
        }
        let mut points = std::collections::BTreeSet::new();
        points.insert(0);
        points.insert(total_iterations);
        let n = total_iterations as f64;
        for i in 0..=99u32 {
            let k = n.powf(f64::from(i) / 99.0).round() as u64;
            points.insert(k.min(total_iterations));
        }
        TraceCadence { total: total_iterations, points: Some(points) }
    }

    /// Whether iteration `k` should be logged.
    pub fn should_record(&self, k: u64) -> bool {
        match &self.points {
            None => k <= self.total,
            Some(points) => points.contains(&k),
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cadence_dense_below_limit_sparse_above() {
        let dense = TraceCadence::new(500);
        assert!((0..=500).all(|k| dense.should_record(k)));

        let sparse = TraceCadence::new(100_000);
        assert!(sparse.should_record(0));
        assert!(sparse.should_record(100_000));
        let count = (0..=100_000).filter(|&k| sparse.should_record(k)).count();
        assert!(count <= 102, "logged {count} points");
        assert!(count >= 50, "logged only {count} points");
    }

    #[test]
    fn csv_headers_match_column_families() {
        assert_eq!(TraceColumns::Standard.header(), "k,calls,fw_gap,gp_norm,f_gap");
        assert!(TraceColumns::HighDim.header().ends_with("grad_l1_sq,nnz"));
        assert!(TraceColumns::Cubic.header().ends_with("lambda_min,model_decrease,subsolver_iters"));
    }

    #[test]
    fn csv_rows_render_missing_metrics_as_empty_cells() {
        let record = RunRecord {
            algorithm: "zscg".into(),
            seed: 7,
            schedule: serde_json::json!({"alpha": 0.5}),
            columns: TraceColumns::Standard,
            rows: vec![
                TraceRow { k: 0, calls: 0, fw_gap: Some(1.5), ..Default::default() },
                TraceRow {
                    k: 1,
                    calls: 20,
                    fw_gap: Some(0.75),
                    gp_norm: Some(0.5),
                    f_gap: Some(0.25),
                    ..Default::default()
                },
            ],
            output_index: Some(1),
            gradient_oracle_calls: 20,
            hessian_oracle_calls: 0,
            lmo_calls: 2,
            output_point: vec![0.0, 0.0],
        };
        let csv = record.trace_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,calls,fw_gap,gp_norm,f_gap");
        assert_eq!(lines[1], "0,0,1.5,,");
        assert_eq!(lines[2], "1,20,0.75,0.5,0.25");
    }

    #[test]
    fn record_json_round_trips() {
        let record = RunRecord {
            algorithm: "zsgd_highdim".into(),
            seed: 11,
            schedule: serde_json::json!({"gamma": 0.01}),
            columns: TraceColumns::HighDim,
            rows: vec![TraceRow {
                k: 3,
                calls: 6,
                grad_l1_sq: Some(2.0),
                nnz: Some(4),
                ..Default::default()
            }],
            output_index: None,
            gradient_oracle_calls: 6,
            hessian_oracle_calls: 0,
            lmo_calls: 0,
            output_point: vec![1.0],
        };
        let text = serde_json::to_string(&record).unwrap();
        let back: RunRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back.rows, record.rows);
        assert_eq!(back.columns, record.columns);
        assert_eq!(back.output_index, None);
    }
}
