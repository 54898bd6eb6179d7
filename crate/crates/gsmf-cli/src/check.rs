//! The `check` runner: operator, regularizer and relaxation identities on
//! the configured problem, then an audited short solve.

use std::process::ExitCode;

use anyhow::{Context, Result};
use gsmf::diagnostics::{descent_audit, relaxation_consistency, report, DiagnosticsReport};
use gsmf::{f_lambda, LinearMap, ProblemSpec, Regularizer, RelaxationParams, SolverConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::run::write_json;

/// Iterations of the audited solve.
const AUDIT_ITERS: usize = 30;

#[derive(Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub items: Vec<CheckItem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsReport>,
}

#[derive(Default)]
struct Items(Vec<CheckItem>);

impl Items {
    fn push(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.0.push(CheckItem { name: name.to_string(), passed, detail: detail.into() });
    }

    /// Records the outcome of a fallible step and hands back its value.
    fn step<T>(&mut self, name: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => {
                self.push(name, true, "ok");
                Some(v)
            }
            Err(e) => {
                self.push(name, false, format!("{e:#}"));
                None
            }
        }
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.push(name, false, format!("not run: {why}"));
    }
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..1.0))
}

fn map_identities(map: &LinearMap, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let n = map.n();
    let u = random(rng, n, n, -1.0);
    let v = DVector::from_fn(map.q(), |_, _| rng.random_range(-1.0..1.0));
    let lhs = map.apply(&u)?.dot(&v);
    let rhs = u.dot(&map.adjoint(&v)?);
    let adjoint_err = (lhs - rhs).abs() / (1.0 + lhs.abs());
    let isometry = map.apply(&map.adjoint(&v)?)? == v;
    let p = map.gram_apply(&u)?;
    let projector = map.gram_apply(&p)? == p;
    let ok = adjoint_err <= 1e-12 && isometry && projector;
    Ok((ok, format!("adjoint error {adjoint_err:.2e}, A(A*v) = v: {isometry}, A*A idempotent: {projector}")))
}

fn shifted_inverse(map: &LinearMap, params: &RelaxationParams, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let n = map.n();
    let w = random(rng, n, n, -1.0);
    let s = map.shifted_inverse_apply(params.alpha(), params.beta(), &w)?;
    let back = &s * params.alpha() + map.gram_apply(&s)? * params.beta();
    let err = (back - &w).norm() / (1.0 + w.norm());
    Ok((err <= 1e-12, format!("relative error {err:.2e}")))
}

/// Compares the prox objective at the prox point against random nearby
/// points, and the column prox against the full prox.
fn prox_optimality(h: &dyn Regularizer, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (n, r, t) = (6, 3, 0.7);
    let w = random(rng, n, r, -1.0);
    let p = h.prox(&w, t)?;
    let value = |x: &DMatrix<f64>| h.eval(x).to_f64() + (x - &w).norm_squared() / (2.0 * t);
    let best = value(&p);
    let mut worse = 0;
    for _ in 0..200 {
        let q = &p + random(rng, n, r, -1.0) * 1e-3;
        if value(&q) < best - 1e-12 {
            worse += 1;
        }
    }
    let mut column_gap = 0.0_f64;
    if h.column_separable() {
        for j in 0..r {
            let c = h.prox_column(j, &w.column(j).into_owned(), t)?;
            column_gap = column_gap.max((c - p.column(j)).amax());
        }
    }
    let ok = worse == 0 && column_gap <= 1e-15;
    Ok((ok, format!("{worse} of 200 perturbations improved the prox objective, column prox gap {column_gap:.1e}")))
}

fn relaxation_identity(spec: &ProblemSpec, params: &RelaxationParams, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (n, r) = (spec.n(), spec.rank());
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let x = random(rng, n, r, 0.0);
        let y = random(rng, n, r, 0.0);
        let f = f_lambda(spec, &x, &y)?.to_f64();
        worst = worst.max(relaxation_consistency(spec, params, &x, &y)? / (1.0 + f.abs()));
    }
    Ok((worst <= 1e-10, format!("max |Θ − F|/(1+|F|) = {worst:.2e}")))
}

fn audited_solve(
    spec: &ProblemSpec,
    params: &RelaxationParams,
    base: &SolverConfig,
) -> Result<(bool, String, DiagnosticsReport)> {
    let config = SolverConfig { audit: true, max_iters: base.max_iters.min(AUDIT_ITERS), max_time_sec: None, ..base.clone() };
    let result = gsmf::solve(spec, params, &config, None)?;
    let violations = descent_audit(&result.trace, spec, params, &config)?;
    let diagnostics = report(spec, params, &config, &result.x, &result.y, &result.trace)?;
    Ok((violations == 0, format!("{violations} violations over {} steps", result.trace.len()), diagnostics))
}

pub fn run(config: &Config) -> Result<ExitCode> {
    let mut items = Items::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.solver.seed);

    let params = items.step("config.relaxation", config.relaxation.build().context("invalid [relaxation]"));
    let target = items.step("config.dataset", config.target());
    let spec = match &target {
        Some(m) => items.step("config.problem", config.problem(m)),
        None => {
            items.skip("config.problem", "no dataset");
            None
        }
    };
    let solver_ok = items.step("config.solver", config.solver.validate().context("invalid [solver]")).is_some();

    let check = |items: &mut Items, name: &str, r: Result<(bool, String)>| match r {
        Ok((ok, detail)) => items.push(name, ok, detail),
        Err(e) => items.push(name, false, format!("{e:#}")),
    };

    match &spec {
        Some(spec) => {
            let n = spec.n();
            check(&mut items, "operators.full_map", map_identities(&LinearMap::full(n), &mut rng));
            check(&mut items, "operators.problem_map", map_identities(spec.map(), &mut rng));
            check(&mut items, "regularizers.psi_prox", prox_optimality(spec.psi(), &mut rng));
            check(&mut items, "regularizers.phi_prox", prox_optimality(spec.phi(), &mut rng));
        }
        None => {
            for name in ["operators.full_map", "operators.problem_map", "regularizers.psi_prox", "regularizers.phi_prox"] {
                items.skip(name, "no problem");
            }
        }
    }

    let mut diagnostics = None;
    match (&spec, &params) {
        (Some(spec), Some(params)) => {
            check(&mut items, "operators.shifted_inverse", shifted_inverse(spec.map(), params, &mut rng));
            check(&mut items, "relaxation.identity", relaxation_identity(spec, params, &mut rng));
            if solver_ok {
                match audited_solve(spec, params, &config.solver) {
                    Ok((ok, detail, report)) => {
                        items.push("solver.descent_audit", ok, detail);
                        diagnostics = Some(report);
                    }
                    Err(e) => items.push("solver.descent_audit", false, format!("{e:#}")),
                }
            } else {
                items.skip("solver.descent_audit", "invalid solver settings");
            }
        }
        _ => {
            for name in ["operators.shifted_inverse", "relaxation.identity", "solver.descent_audit"] {
                items.skip(name, "no problem or relaxation parameters");
            }
        }
    }

    let passed = items.0.iter().all(|i| i.passed);
    for i in &items.0 {
        println!("[{}] {}: {}", if i.passed { "PASS" } else { "FAIL" }, i.name, i.detail);
    }
    let out = CheckReport { passed, items: items.0, diagnostics };
    let dir = config.out_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("check.json"), &out)?;
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
