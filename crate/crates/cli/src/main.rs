//! `zo-opt`: run experiment configs, check rate trends, validate estimators.
//!
//! Exit codes: 0 success, 1 validation failure (bad config/arguments, failed
//! trend or estimator check), 2 runtime failure (solver or I/O error).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zo_core::harness::{
    read_summary_criterion, run_experiment, trend_check, validate_estimators, ExperimentConfig,
    ExperimentOptions,
};
use zo_core::ZoError;

#[derive(Parser)]
#[command(name = "zo-opt", version, about = "Zeroth-order optimization experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (seed, N) pair of an experiment config.
    Run(RunArgs),
    /// Fit a log-log slope to a summary criterion and check its range.
    Trend(TrendArgs),
    /// Monte-Carlo checks of the estimator layer.
    ValidateEstimators(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// Compute reference metrics in traces.
    #[arg(long, value_parser = parse_on_off, default_value = "on")]
    verify: bool,
}

#[derive(Args)]
struct TrendArgs {
    /// Summary CSV produced by `zo-opt run`.
    summary: PathBuf,
    /// Criterion column to fit (fw_gap, gp_norm, f_gap, grad_l1_sq, nnz, lambda_min).
    #[arg(long)]
    criterion: String,
    /// Acceptable slope range, `LO:HI`.
    #[arg(long, value_parser = parse_slope_range, allow_hyphen_values = true)]
    slope: (f64, f64),
}

#[derive(Args)]
struct ValidateArgs {
    /// Cut sample counts roughly fivefold.
    #[arg(long)]
    quick: bool,
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected 'on' or 'off', got '{other}'")),
    }
}

fn parse_slope_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got '{s}'"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound '{lo}'"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound '{hi}'"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Config and argument problems are the caller's to fix (exit 1); everything
/// else that goes wrong while executing is a runtime failure (exit 2).
fn exit_code_for(err: &ZoError) -> u8 {
    match err {
        ZoError::Config(_) | ZoError::Contract(_) | ZoError::DimensionMismatch { .. } => {
            EXIT_VALIDATION
        }
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are validation failures; --help/--version exit 0.
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Trend(args) => cmd_trend(args),
        Command::ValidateEstimators(args) => cmd_validate(args),
    };
    ExitCode::from(code)
}

fn cmd_run(args: RunArgs) -> u8 {
    let config = match ExperimentConfig::from_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let options = ExperimentOptions { out_dir: args.out, jobs: args.jobs, verify: args.verify };
    match run_experiment(&config, &options) {
        Ok(report) => {
            println!(
                "wrote {} trace file(s) and {}",
                report.trace_paths.len(),
                report.summary_path.display()
            );
            for row in &report.rows {
                println!(
                    "  N={}: {} seed(s), {} failure(s), {} oracle calls",
                    row.n_iters, row.seed_count, row.failures, row.total_calls
                );
            }
            if report.failures.is_empty() {
                0
            } else {
                for failure in &report.failures {
                    eprintln!(
                        "run failed: N={} seed={}: {}",
                        failure.n_iters, failure.seed, failure.message
                    );
                }
                EXIT_RUNTIME
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn cmd_trend(args: TrendArgs) -> u8 {
    let (lo, hi) = args.slope;
    let result = read_summary_criterion(&args.summary, &args.criterion)
        .and_then(|points| trend_check(&points, &args.criterion, lo, hi));
    match result {
        Ok(report) => {
            println!(
                "{}: slope {:.4} (std error {:.4}) over {} point(s), {} excluded; range [{}, {}]: {}",
                report.criterion,
                report.slope,
                report.slope_std_error,
                report.points_used,
                report.points_excluded,
                report.lo,
                report.hi,
                if report.pass { "PASS" } else { "FAIL" }
            );
            if report.pass {
                0
            } else {
                EXIT_VALIDATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn cmd_validate(args: ValidateArgs) -> u8 {
    match validate_estimators(args.quick) {
        Ok(results) => {
            let mut all_pass = true;
            for check in &results {
                println!(
                    "{} {}: {}",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.detail
                );
                all_pass &= check.pass;
            }
            if all_pass {
                0
            } else {
                EXIT_VALIDATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
