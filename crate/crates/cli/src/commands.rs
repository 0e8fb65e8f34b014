//! The `run`, `report` and `oracle` subcommands.

use std::fs;
use std::io::Write;
use std::path::Path;

use lagbo::driver::{self, best_feasible, best_overall, CampaignError, IterationReport, RunMode, RunRecord};
use lagbo::evaluators::BuiltinEvaluator;
use lagbo::oracle::{self, OracleHit};
use lagbo::run_dir::{self, RunStatus};
use thiserror::Error;

use crate::config::{self, ConfigFile, Overrides};
use crate::report;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("evaluator failure: {0}")]
    Evaluator(String),
    #[error("report input: {0}")]
    Report(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Evaluator(_) => 3,
            CliError::Report(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

fn describe(r: &RunRecord) -> String {
    let x: Vec<String> = r.x.values().iter().map(|v| format!("{v:.6e}")).collect();
    format!(
        "iteration {} x=[{}] bv={:.4} rsp_on={:.4} fom={:.4}",
        r.iteration,
        x.join(", "),
        r.eval.bv,
        r.eval.rsp_on,
        r.eval.fom
    )
}

fn progress_line(rep: &IterationReport<'_>) -> String {
    let r = rep.record;
    let target = r.target_used.map_or("-".to_owned(), |t| format!("{t:.3}"));
    let best = rep.incumbent_fom.map_or("-".to_owned(), |b| format!("{b:.4}"));
    if r.eval.valid {
        format!(
            "[{:>4}] {:<4} target={target} lambda={:.4} bv={:.4} fom={:.4} best={best}",
            r.iteration,
            r.phase.as_str(),
            r.lambda_used,
            r.eval.bv,
            r.eval.fom
        )
    } else {
        format!("[{:>4}] {:<4} invalid evaluation", r.iteration, r.phase.as_str())
    }
}

/// Runs a campaign and writes its run directory. Progress goes to `log`, the
/// final summary to `out`.
pub fn cmd_run(
    config_path: Option<&Path>,
    flags: Overrides,
    out: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<(), CliError> {
    let file = match config_path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let resolved = config::resolve(file, flags)?;
    let dir = resolved.out.clone();
    let mode = resolved.run.mode;
    let rule = resolved.run.feasibility;

    let mut sink = |rep: &IterationReport<'_>| {
        let _ = writeln!(log, "{}", progress_line(rep));
    };
    let outcome = driver::run(resolved.run, &mut sink);
    let (ds, failure) = match outcome {
        Ok(ds) => (ds, None),
        Err(abort) => (abort.dataset, Some(abort.error)),
    };
    let status = if failure.is_some() {
        RunStatus::Aborted
    } else {
        RunStatus::Complete
    };
    run_dir::write_run_dir(&dir, &ds, status, failure.as_ref().map(|e| e.to_string()))
        .map_err(|e| CliError::Other(e.to_string()))?;

    let _ = writeln!(out, "run directory: {}", dir.display());
    let _ = writeln!(out, "records: {} ({} valid)", ds.len(), ds.valid_count());
    match best_overall(&ds) {
        Some(r) => {
            let _ = writeln!(out, "incumbent: {}", describe(r));
        }
        None => {
            let _ = writeln!(out, "incumbent: none");
        }
    }
    if let RunMode::Constrained { bv_target } = mode {
        match best_feasible(&ds, bv_target, rule) {
            Some(r) => {
                let _ = writeln!(out, "best feasible (target {bv_target} V): {}", describe(r));
            }
            None => {
                let _ = writeln!(out, "best feasible (target {bv_target} V): none");
            }
        }
    }

    match failure {
        None => Ok(()),
        Some(e @ CampaignError::Config(_)) => Err(CliError::Config(config::ConfigError::Invalid(e.to_string()))),
        Some(e @ (CampaignError::Evaluator(_) | CampaignError::TooManyInvalid { .. })) => {
            Err(CliError::Evaluator(e.to_string()))
        }
        Some(e) => Err(CliError::Other(e.to_string())),
    }
}

/// Regenerates the plots and tables of a run directory in place.
pub fn cmd_report(dir: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let (ds, _) = run_dir::read_run_dir(dir).map_err(|e| CliError::Report(e.to_string()))?;
    let hull = driver::frontier_report(&ds).map_err(|e| CliError::Report(format!("{}: {e}", dir.display())))?;

    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
    };
    write(report::SCATTER_SVG, report::scatter_svg(&ds).as_bytes())?;
    write(report::CONVERGENCE_CSV, report::convergence_csv(&ds).as_bytes())?;
    write(report::FRONTIER_SVG, report::frontier_svg(&ds, &hull).as_bytes())?;
    let mut csv = Vec::new();
    hull.write_csv(&mut csv).map_err(|e| CliError::Other(e.to_string()))?;
    write(report::FRONTIER_CSV, &csv)?;

    let _ = writeln!(
        out,
        "report: {} markers, {} hull vertices in {}",
        ds.valid_count(),
        hull.len(),
        dir.display()
    );
    Ok(())
}

fn print_hit(out: &mut dyn Write, label: &str, hit: &OracleHit) {
    let x: Vec<String> = hit.x.values().iter().map(|v| format!("{v:.6e}")).collect();
    let _ = writeln!(
        out,
        "{label}: x=[{}] bv={:.6} rsp_on={:.6} fom={:.10}",
        x.join(", "),
        hit.eval.bv,
        hit.eval.rsp_on,
        hit.eval.fom
    );
}

/// Brute-force reference optimum of a builtin evaluator.
pub fn cmd_oracle(
    evaluator: &str,
    target: Option<f64>,
    resolution: usize,
    seed: u64,
    out: &mut dyn Write,
) -> Result<oracle::OracleReport, CliError> {
    let ev = BuiltinEvaluator::from_name(evaluator).map_err(|e| {
        CliError::Config(config::ConfigError::Invalid(format!(
            "{e}; oracles exist only for builtins"
        )))
    })?;
    if ev == BuiltinEvaluator::Toy2d && resolution < 2 {
        return Err(CliError::Config(config::ConfigError::Invalid(
            "resolution must be at least 2".into(),
        )));
    }
    let report = oracle::reference(ev, resolution, seed, target);
    print_hit(out, "best", &report.best);
    if let Some(t) = target {
        match &report.constrained {
            Some(hit) => print_hit(out, &format!("best with bv >= {t}"), hit),
            None => {
                let _ = writeln!(out, "best with bv >= {t}: infeasible");
            }
        }
    }
    Ok(report)
}
