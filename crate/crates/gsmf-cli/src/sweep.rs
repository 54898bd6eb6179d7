//! Parameter sweeps over `alpha`, `lambda` or a `noise_t × rank` grid.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use gsmf::io::write_trace_file;
use gsmf::Status;
use rayon::prelude::*;

use crate::config::{Config, SweepConfig};
use crate::run::solve_once;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub alpha: f64,
    pub lambda: f64,
    pub noise_t: f64,
    pub rank: usize,
}

/// The sweep axis name and its points, in table order.
pub fn points(config: &Config) -> Result<(&'static str, Vec<Point>)> {
    let sweep = config.sweep.as_ref().ok_or_else(|| anyhow!("config has no [sweep] section"))?;
    let base = Point {
        alpha: config.relaxation.alpha,
        lambda: config.problem.lambda,
        noise_t: config.dataset.noise_t,
        rank: config.problem.rank,
    };
    let nonempty = |name: &str, len: usize| {
        if len == 0 {
            bail!("sweep axis `{name}` is empty")
        }
        Ok(())
    };
    match sweep {
        SweepConfig { alpha: Some(a), lambda: None, noise_t: None, rank: None, .. } => {
            nonempty("alpha", a.len())?;
            Ok(("alpha", a.iter().map(|&alpha| Point { alpha, ..base }).collect()))
        }
        SweepConfig { alpha: None, lambda: Some(l), noise_t: None, rank: None, .. } => {
            nonempty("lambda", l.len())?;
            Ok(("lambda", l.iter().map(|&lambda| Point { lambda, ..base }).collect()))
        }
        SweepConfig { alpha: None, lambda: None, noise_t: Some(t), rank: Some(r), .. } => {
            nonempty("noise_t", t.len())?;
            nonempty("rank", r.len())?;
            let grid = t.iter().flat_map(|&noise_t| r.iter().map(move |&rank| Point { noise_t, rank, ..base }));
            Ok(("noise_t,rank", grid.collect()))
        }
        _ => bail!("[sweep] needs exactly one of `alpha`, `lambda`, or both `noise_t` and `rank`"),
    }
}

struct Outcome {
    iters: usize,
    relobj: f64,
    time: f64,
    sym_gap: f64,
    status: Status,
}

fn run_point(base: &Config, p: Point, rep: usize, trace_path: &Path) -> Result<Outcome> {
    let mut config = base.clone();
    config.relaxation.alpha = p.alpha;
    config.problem.lambda = p.lambda;
    config.dataset.noise_t = p.noise_t;
    config.problem.rank = p.rank;
    config.solver.seed = base.solver.seed.wrapping_add(rep as u64);
    let (_, _, result) = solve_once(&config)?;
    write_trace_file(trace_path, &result.trace)?;
    let last = result.trace.last();
    Ok(Outcome {
        iters: result.iterations(),
        relobj: result.final_relobj(),
        time: last.map_or(0.0, |r| r.elapsed_sec),
        sym_gap: last.map_or(f64::NAN, |r| r.sym_gap),
        status: result.status,
    })
}

pub fn run(config: &Config, jobs: usize) -> Result<ExitCode> {
    let (axis, points) = points(config)?;
    let reps = config.sweep.as_ref().map_or(1, |s| s.reps);
    if reps == 0 {
        bail!("sweep `reps` must be at least 1");
    }
    let dir = config.out_dir();
    let runs_dir = dir.join("runs");
    fs::create_dir_all(&runs_dir).with_context(|| format!("creating {}", runs_dir.display()))?;

    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..reps).map(move |r| (i, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let outcomes: Vec<Result<Outcome>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, rep)| {
                let path = runs_dir.join(format!("point{i:03}_rep{rep:02}.csv"));
                let out = run_point(config, points[i], rep, &path);
                if let Err(e) = &out {
                    log::warn!("point {i} rep {rep} failed: {e:#}");
                }
                out
            })
            .collect()
    });

    let path = dir.join("sweep.csv");
    let mut table = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(table, "point,alpha,lambda,noise_t,rank,reps,status,mean_iters,mean_relobj,mean_time_sec,mean_sym_gap,error")?;
    let (mut failed, mut limited) = (false, false);
    for (i, p) in points.iter().enumerate() {
        let runs = &outcomes[i * reps..(i + 1) * reps];
        let ok: Vec<&Outcome> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
        let error = runs.iter().find_map(|r| r.as_ref().err()).map(|e| format!("{e:#}"));
        let status = if error.is_some() {
            failed = true;
            "failed"
        } else if ok.iter().all(|o| o.status == Status::Converged) {
            "converged"
        } else {
            limited = true;
            "limit"
        };
        let mean = |f: fn(&Outcome) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|o| f(o)).sum::<f64>() / ok.len() as f64
            }
        };
        writeln!(
            table,
            "{i},{},{},{},{},{},{status},{},{},{},{},{}",
            p.alpha,
            p.lambda,
            p.noise_t,
            p.rank,
            ok.len(),
            mean(|o| o.iters as f64),
            mean(|o| o.relobj),
            mean(|o| o.time),
            mean(|o| o.sym_gap),
            csv_field(error.as_deref().unwrap_or(""))
        )?;
    }
    println!("swept {axis} over {} points x {reps} reps; table in {}", points.len(), path.display());
    Ok(if failed {
        ExitCode::from(1)
    } else if limited {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
