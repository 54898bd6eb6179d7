//! `gen-data` and `solve`.

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use gsmf::diagnostics::{descent_audit, stationarity_residual, symmetry_gap};
use gsmf::io::{write_matrix, write_trace_file};
use gsmf::{ProblemSpec, RelaxationParams, SolveResult, Status};
use serde::Serialize;

use crate::config::Config;

pub fn gen_data(config: &Config) -> Result<ExitCode> {
    let m = config.target()?;
    let dir = config.out_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("M.mtx");
    write_matrix(&path, &m)?;
    println!("wrote {}x{} target to {}", m.nrows(), m.ncols(), path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
pub struct RunSummary<'a> {
    pub config: &'a Config,
    pub f_value: f64,
    pub relobj: f64,
    pub sym_gap: f64,
    pub stationarity_residual: f64,
    pub iters: usize,
    pub elapsed_sec: f64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub descent_violations: Option<usize>,
}

pub fn exit_code(status: Status) -> ExitCode {
    match status {
        Status::Converged => ExitCode::SUCCESS,
        Status::IterLimit | Status::TimeLimit => ExitCode::from(2),
    }
}

/// Summary values taken from the last trace row, or from the start point
/// when no step was accepted.
pub fn summarize<'a>(config: &'a Config, spec: &ProblemSpec, result: &SolveResult) -> Result<RunSummary<'a>> {
    let (sym_gap, residual, elapsed) = match result.trace.last() {
        Some(r) => (r.sym_gap, r.stationarity_residual, r.elapsed_sec),
        None => (symmetry_gap(&result.x, &result.y)?, stationarity_residual(spec, &result.x, &result.y)?, 0.0),
    };
    Ok(RunSummary {
        config,
        f_value: result.final_f(),
        relobj: result.final_relobj(),
        sym_gap,
        stationarity_residual: residual,
        iters: result.iterations(),
        elapsed_sec: elapsed,
        status: result.status,
        descent_violations: None,
    })
}

pub fn solve_once(config: &Config) -> Result<(ProblemSpec, RelaxationParams, SolveResult)> {
    let target = config.target()?;
    let spec = config.problem(&target)?;
    let params = config.relaxation.build().context("invalid [relaxation]")?;
    let result = gsmf::solve(&spec, &params, &config.solver, None)?;
    Ok((spec, params, result))
}

pub fn solve(config: &Config) -> Result<ExitCode> {
    let (spec, params, result) = solve_once(config)?;
    let dir = config.out_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_trace_file(&dir.join("trace.csv"), &result.trace)?;
    let mut summary = summarize(config, &spec, &result)?;
    if config.solver.audit {
        summary.descent_violations = Some(descent_audit(&result.trace, &spec, &params, &config.solver)?);
    }
    write_json(&dir.join("summary.json"), &summary)?;
    if config.output.factors {
        write_matrix(&dir.join("X.mtx"), &result.x)?;
        write_matrix(&dir.join("Y.mtx"), &result.y)?;
    }
    println!(
        "{:?} after {} iterations: relobj {:.6e}, sym_gap {:.3e}, residual {:.3e}",
        summary.status, summary.iters, summary.relobj, summary.sym_gap, summary.stationarity_residual
    );
    Ok(exit_code(result.status))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
