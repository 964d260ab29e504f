//! Cross-solver contracts: determinism, feasibility, the verify switch,
//! schedule fidelity, oracle-call accounting, and the budget trends the
//! convergence theory predicts.

use ndarray::{Array1, Array2};
use zo_core::cg_solvers::{
    default_bound_constant, zscg, zscg_accelerated, zsgd_inexact_nonconvex, AcceleratedSchedule,
    InexactZsgdSchedule, OutputRule, RunOptions, ZscgSchedule,
};
use zo_core::cubic::{second_order_criterion, zscrn, CubicParams};
use zo_core::highdim::{zsgd, zsgd_truncated, HighDimSchedule};
use zo_core::trace::RunRecord;
use zo_core::{ConstraintSet, ProblemSpec};

fn diag_quadratic(entries: &[f64], noise: f64) -> ProblemSpec {
    let d = entries.len();
    let a = Array2::from_diag(&Array1::from(entries.to_vec()));
    ProblemSpec::quadratic(a, Array1::zeros(d), noise, 10.0).unwrap()
}

fn sparse_problem(d: usize, noise: f64) -> ProblemSpec {
    let inner = Array2::from_diag(&Array1::from(vec![1.0, 0.7, 0.4]));
    let c = Array1::from(vec![-0.5, 0.3, -0.2]);
    ProblemSpec::sparse_support(d, vec![1, 4, 9], inner, c, noise, 10.0).unwrap()
}

fn saddle(noise: f64) -> ProblemSpec {
    ProblemSpec::strict_saddle_2d(noise, 2.0).unwrap()
}

fn saddle_box() -> ConstraintSet {
    ConstraintSet::hyper_box(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap()
}

/// One cheap run of every solver entry point, as (name, record, output).
fn run_everything(seed: u64, options: &RunOptions) -> Vec<(&'static str, RunRecord, Array1<f64>)> {
    let mut runs = Vec::new();

    let quad4 = diag_quadratic(&[1.0, 1.5, 2.0, 2.5], 0.1);
    let l1 = ConstraintSet::l1_ball(4, 1.0).unwrap();
    let uniform = ZscgSchedule::custom(6, 1e-2, 0.4, 4, OutputRule::UniformIterates).unwrap();
    let (out, rec) = zscg(&quad4, &l1, &uniform, seed, options).unwrap();
    runs.push(("zscg_uniform", rec, out));

    let weighted = ZscgSchedule {
        n_iters: 6,
        nu: 1e-2,
        alpha: None,
        batch: 4,
        output: OutputRule::GammaWeighted,
    };
    let (out, rec) = zscg(&quad4, &l1, &weighted, seed, options).unwrap();
    runs.push(("zscg_weighted", rec, out));

    let l2 = ConstraintSet::l2_ball(4, 1.0).unwrap();
    let accel = AcceleratedSchedule {
        n_iters: 6,
        nu: 1e-2,
        lipschitz_grad: quad4.lipschitz_grad(),
        initial_gap_sq: 1.0,
        batch_scale: 0.5,
        max_inner_iters: 100_000,
    };
    let (out, rec) = zscg_accelerated(&quad4, &l2, &accel, seed, options).unwrap();
    runs.push(("zscg_accelerated", rec, out));

    let sad = saddle(0.1);
    let inexact = InexactZsgdSchedule {
        n_iters: 6,
        nu: 1e-2,
        gamma: 2.0 * sad.lipschitz_grad(),
        mu: 1e-3,
        batch: 4,
        max_inner_iters: 100_000,
    };
    let (out, rec) = zsgd_inexact_nonconvex(&sad, &saddle_box(), &inexact, seed, options).unwrap();
    runs.push(("zsgd_inexact", rec, out));

    let quad6 = diag_quadratic(&[0.5, 0.8, 1.1, 1.4, 1.7, 2.0], 0.1);
    let plain = HighDimSchedule::custom(50, 0.05, 1e-2, 6).unwrap();
    let (out, rec) = zsgd(&quad6, &plain, seed, options).unwrap();
    runs.push(("zsgd_highdim", rec, out));

    let sparse = sparse_problem(12, 0.1);
    let trunc = HighDimSchedule::custom(40, 0.02, 1e-2, 3).unwrap();
    let (out, rec) = zsgd_truncated(&sparse, &trunc, seed, options).unwrap();
    runs.push(("zsgd_truncated", rec, out));

    let cubic = CubicParams::practical(4, 1e-2, 3.0, 8, 6).unwrap();
    let x0 = Array1::from(vec![0.3, 0.4]);
    let (out, rec) = zscrn(&saddle(0.0), &cubic, Some(&x0.view()), seed, options).unwrap();
    runs.push(("zscrn", rec, out));

    runs
}

#[test]
fn every_solver_is_deterministic_per_seed() {
    let options = RunOptions::default();
    let first = run_everything(42, &options);
    let second = run_everything(42, &options);
    for ((name, rec_a, out_a), (_, rec_b, out_b)) in first.iter().zip(&second) {
        assert_eq!(out_a, out_b, "{name}: outputs differ across identical runs");
        let json_a = serde_json::to_string(rec_a).unwrap();
        let json_b = serde_json::to_string(rec_b).unwrap();
        assert_eq!(json_a, json_b, "{name}: records differ across identical runs");
    }
}

#[test]
fn verification_toggle_never_alters_trajectories() {
    let on = run_everything(7, &RunOptions { verify: true });
    let off = run_everything(7, &RunOptions { verify: false });
    for ((name, rec_on, out_on), (_, rec_off, out_off)) in on.iter().zip(&off) {
        assert_eq!(out_on, out_off, "{name}: verify toggle moved the iterates");
        assert_eq!(
            rec_on.gradient_oracle_calls, rec_off.gradient_oracle_calls,
            "{name}: verify toggle changed oracle usage"
        );
        assert_eq!(rec_on.hessian_oracle_calls, rec_off.hessian_oracle_calls, "{name}");
        assert_eq!(rec_on.output_index, rec_off.output_index, "{name}");
        assert_eq!(rec_on.rows.len(), rec_off.rows.len(), "{name}");
        assert!(rec_off.rows.iter().all(|r| r.f_gap.is_none()), "{name}: metrics leak");
        assert!(rec_on.rows.iter().any(|r| r.f_gap.is_some()), "{name}: metrics missing");
    }
}

#[test]
fn outputs_stay_feasible_on_every_set_kind() {
    let problem = diag_quadratic(&[1.0, 1.5, 2.0], 0.1);
    let sets = vec![
        ConstraintSet::l1_ball(3, 1.0).unwrap(),
        ConstraintSet::l2_ball(3, 1.0).unwrap(),
        ConstraintSet::hyper_box(vec![-1.0, -0.5, 0.0], vec![0.5, 1.0, 2.0]).unwrap(),
        ConstraintSet::simplex(3, 1.0).unwrap(),
    ];
    let options = RunOptions::default();
    for set in &sets {
        let schedule = ZscgSchedule::custom(8, 1e-2, 0.5, 4, OutputRule::UniformIterates).unwrap();
        let (out, _) = zscg(&problem, set, &schedule, 3, &options).unwrap();
        assert!(set.contains(&out.view(), 1e-9), "zscg left {set:?}");

        let accel = AcceleratedSchedule {
            n_iters: 8,
            nu: 1e-2,
            lipschitz_grad: problem.lipschitz_grad(),
            initial_gap_sq: 1.0,
            batch_scale: 0.5,
            max_inner_iters: 100_000,
        };
        let (out, _) = zscg_accelerated(&problem, set, &accel, 3, &options).unwrap();
        assert!(set.contains(&out.view(), 1e-9), "accelerated left {set:?}");

        let inexact = InexactZsgdSchedule {
            n_iters: 8,
            nu: 1e-2,
            gamma: 2.0 * problem.lipschitz_grad(),
            mu: 1e-3,
            batch: 4,
            max_inner_iters: 100_000,
        };
        let (out, _) = zsgd_inexact_nonconvex(&problem, set, &inexact, 3, &options).unwrap();
        assert!(set.contains(&out.view(), 1e-9), "inexact zsgd left {set:?}");
    }
}

#[test]
fn accelerated_theory_schedule_matches_closed_forms() {
    let problem = diag_quadratic(&[0.5, 1.0, 1.5, 2.0, 2.5, 3.0], 0.2);
    let set = ConstraintSet::l2_ball(6, 1.0).unwrap();
    let n = 20usize;
    let schedule = AcceleratedSchedule::theory(&problem, &set, n, None).unwrap();

    // Default start sits on the optimum here, so the initial gap falls back
    // to the squared diameter.
    let d0 = 4.0;
    assert_eq!(schedule.initial_gap_sq, d0);
    let d = 6.0f64;
    let nf = n as f64;
    let nu = (1.0 / (d + 3.0)).max((d0 / (d * (nf + 1.0))).sqrt()) / (2.0 * nf).sqrt();
    assert!((schedule.nu - nu).abs() <= 1e-15 * nu);
    let b = default_bound_constant(&problem, &set);
    let scale = ((d + 5.0) * b * nf).max(d + 3.0) / d0;
    assert!((schedule.batch_scale - scale).abs() <= 1e-12 * scale);

    assert_eq!(schedule.alpha(1), 1.0);
    assert_eq!(schedule.alpha(3), 0.5);
    assert_eq!(schedule.gamma(2), 2.0 * problem.lipschitz_grad());
    let mu4 = problem.lipschitz_grad() * d0 / (4.0 * nf);
    assert!((schedule.mu(4) - mu4).abs() <= 1e-15 * mu4);
    for k in [1usize, 2, 7, 20] {
        let expected = (k as f64 * (k as f64 + 1.0) * scale).ceil().max(1.0) as u64;
        assert_eq!(schedule.batch_size(k), expected, "batch at k={k}");
    }
}

#[test]
fn oracle_accounting_matches_schedule_sums() {
    let options = RunOptions::default();
    let runs = run_everything(11, &options);
    for (name, rec, _) in &runs {
        let expected_grad: u64 = match *name {
            "zscg_uniform" | "zscg_weighted" => 2 * 4 * 6,
            "zscg_accelerated" => (1..=6u64)
                .map(|k| 2 * ((k as f64 * (k as f64 + 1.0) * 0.5).ceil().max(1.0) as u64))
                .sum(),
            "zsgd_inexact" => 2 * 4 * 6,
            "zsgd_highdim" => 2 * 50,
            "zsgd_truncated" => 2 * 40,
            "zscrn" => 2 * 8 * 4,
            other => panic!("unexpected run {other}"),
        };
        assert_eq!(rec.gradient_oracle_calls, expected_grad, "{name}: gradient calls");
        let expected_hess = if *name == "zscrn" { 3 * 6 * 4 } else { 0 };
        assert_eq!(rec.hessian_oracle_calls, expected_hess, "{name}: hessian calls");
        assert_eq!(rec.oracle_calls(), expected_grad + expected_hess, "{name}: total");
        match *name {
            "zscg_uniform" | "zscg_weighted" | "zscg_accelerated" | "zsgd_inexact" => {
                assert!(rec.lmo_calls > 0, "{name}: missing LMO accounting")
            }
            _ => assert_eq!(rec.lmo_calls, 0, "{name}: spurious LMO accounting"),
        }
    }
}

#[test]
fn zscg_convex_gap_improves_with_budget() {
    let problem = diag_quadratic(&[0.6, 0.8, 1.0, 1.2, 1.4], 0.05);
    let set = ConstraintSet::l1_ball(5, 1.0).unwrap();
    let options = RunOptions::default();
    let mean_gap = |n: usize| -> f64 {
        let schedule = ZscgSchedule::theory_convex(&problem, &set, n).unwrap();
        let total: f64 = (0..10u64)
            .map(|seed| {
                let (_, rec) = zscg(&problem, &set, &schedule, seed, &options).unwrap();
                rec.final_row().unwrap().fw_gap.unwrap()
            })
            .sum();
        total / 10.0
    };
    let coarse = mean_gap(8);
    let fine = mean_gap(32);
    assert!(
        fine < coarse,
        "convex schedule should shrink the mean FW gap with budget: {fine:.4e} vs {coarse:.4e}"
    );
}

#[test]
fn accelerated_gap_improves_with_budget() {
    let problem = diag_quadratic(&[0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2], 0.05);
    let set = ConstraintSet::l2_ball(8, 1.0).unwrap();
    let options = RunOptions::default();
    let median_f_gap = |n: usize| -> f64 {
        let schedule = AcceleratedSchedule {
            n_iters: n,
            nu: 1e-2,
            lipschitz_grad: problem.lipschitz_grad(),
            initial_gap_sq: 4.0,
            batch_scale: 0.5,
            max_inner_iters: 200_000,
        };
        let mut gaps: Vec<f64> = (0..16u64)
            .map(|seed| {
                let (_, rec) = zscg_accelerated(&problem, &set, &schedule, seed, &options).unwrap();
                rec.final_row().unwrap().f_gap.unwrap()
            })
            .collect();
        gaps.sort_by(|a, b| a.total_cmp(b));
        0.5 * (gaps[7] + gaps[8])
    };
    let coarse = median_f_gap(16);
    let fine = median_f_gap(64);
    assert!(fine < coarse, "median objective gap: {fine:.4e} vs {coarse:.4e}");
}

#[test]
fn inexact_zsgd_mapping_shrinks_with_budget() {
    let problem = saddle(0.05);
    let set = saddle_box();
    let options = RunOptions::default();
    let median_gp_sq = |n: usize| -> f64 {
        let schedule = InexactZsgdSchedule::theory(&problem, &set, n).unwrap();
        let mut vals: Vec<f64> = (0..8u64)
            .map(|seed| {
                let (_, rec) =
                    zsgd_inexact_nonconvex(&problem, &set, &schedule, seed, &options).unwrap();
                rec.final_row().unwrap().gp_norm.unwrap().powi(2)
            })
            .collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        0.5 * (vals[3] + vals[4])
    };
    let coarse = median_gp_sq(100);
    let fine = median_gp_sq(400);
    assert!(fine < coarse, "median squared gradient mapping: {fine:.4e} vs {coarse:.4e}");
}

#[test]
fn cubic_newton_escapes_where_budget_matched_sgd_stalls() {
    // Both methods start exactly at the strict saddle (the all-zero default)
    // with a 25k-call budget. The cubic step exploits estimated negative
    // curvature; plain zsgd with a conservative 1/(L (d+4) sqrt(N)) step only
    // diffuses near the stationary start.
    let problem = saddle(0.0);
    let options = RunOptions::default();
    let seeds: Vec<u64> = (0..20).collect();

    let mut cubic = CubicParams::practical(50, 1e-2, 3.0, 100, 100).unwrap();
    cubic.subsolver_tol = 1e-6;
    let mut escaped = 0;
    let mut dists = Vec::new();
    for &seed in &seeds {
        let (out, rec) = zscrn(&problem, &cubic, None, seed, &options).unwrap();
        assert_eq!(rec.oracle_calls(), 25_000);
        let (_, lambda_min) = second_order_criterion(&problem, &out.view()).unwrap();
        if lambda_min > 0.0 {
            escaped += 1;
        }
        let to_plus = ((out[0] - 1.0).powi(2) + out[1].powi(2)).sqrt();
        let to_minus = ((out[0] + 1.0).powi(2) + out[1].powi(2)).sqrt();
        dists.push(to_plus.min(to_minus));
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    let median_dist = 0.5 * (dists[9] + dists[10]);
    assert!(escaped >= 18, "cubic Newton escaped only {escaped}/20 saddle starts");
    assert!(median_dist < 0.1, "median distance to a minimizer {median_dist:.3}");

    let n_sgd = 12_500usize;
    let l = problem.lipschitz_grad();
    let gamma = 1.0 / (l * 6.0 * (n_sgd as f64).sqrt());
    let schedule = HighDimSchedule::custom(n_sgd, gamma, 1e-2, 2).unwrap();
    let mut stalled = 0;
    for &seed in &seeds {
        let (out, rec) = zsgd(&problem, &schedule, seed, &options).unwrap();
        assert_eq!(rec.oracle_calls(), 25_000);
        if out.dot(&out).sqrt() < 0.1 {
            stalled += 1;
        }
    }
    assert!(stalled >= 5, "expected matched-budget zsgd to stay near the saddle, stalled {stalled}/20");
}
