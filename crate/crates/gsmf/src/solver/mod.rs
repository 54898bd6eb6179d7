//! The alternating solver: `Z` update, backtracking on the proximal weights
//! `(μ, σ)`, nonmonotone reference values and termination.
//!
//! Each outer iteration forms `Z*(X, Y)` implicitly, then tries candidates
//! `(U, V)` until
//!
//! ```text
//! F_λ(U, V) − R_k ≤ −c/2·(||U − X||² + ||V − Y||²)
//! ```
//!
//! `μ` grows by `τ` up to `μmax = (α + 2γρ)||Y||₂² + c`; once it is capped, only
//! `σ` grows, up to `σmax = (α + 2γρ)||U||₂² + c`. At both caps the candidate
//! is guaranteed to pass, so the loop is finite.

mod updates;

pub use updates::{update_u, update_v, Scheme, ZOperator};

use std::collections::VecDeque;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{stationarity_residual, symmetry_gap};
use crate::error::{Error, Result};
use crate::linalg::{dist2, spectral_norm_sq};
use crate::objective::{f_lambda, relobj_from_value, snmf_objective_cached, GramCache, ProblemSpec, RelaxationParams, TrackedMatrix};

/// How the reference value `R_k` is maintained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum LineSearch {
    /// `R ← (1 − p)R + pF`.
    Average { p: f64 },
    /// `R` is the largest of the last `window + 1` objective values.
    MaxType { window: usize },
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch::Average { p: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub line_search: LineSearch,
    pub mu_min: f64,
    pub sigma_min: f64,
    /// Cap on the initial `σ` of each outer iteration.
    pub sigma_max0: f64,
    pub tau: f64,
    pub c: f64,
    pub p_min: f64,
    pub tol: f64,
    pub consec_required: usize,
    pub max_iters: usize,
    pub max_time_sec: Option<f64>,
    /// Seeds the uniform(0,1) starting point when none is supplied.
    pub seed: u64,
    /// Keep iterate snapshots in the trace for [`descent_audit`](crate::diagnostics::descent_audit).
    pub audit: bool,
    /// Write wall-clock time into records; off makes traces reproducible byte for byte.
    pub record_elapsed: bool,
    /// Evaluate candidates through Gram products (symmetric NMF only).
    pub cached_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            scheme: Scheme::Hierarchical,
            line_search: LineSearch::default(),
            mu_min: 1.0,
            sigma_min: 1.0,
            sigma_max0: 1e6,
            tau: 4.0,
            c: 1e-4,
            p_min: 0.01,
            tol: 1e-10,
            consec_required: 3,
            max_iters: 10_000,
            max_time_sec: None,
            seed: 0,
            audit: false,
            record_elapsed: true,
            cached_objective: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.mu_min > 0.0) || !self.mu_min.is_finite() {
            return bad(format!("mu_min must be positive, got {}", self.mu_min));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max0 && self.sigma_max0.is_finite()) {
            return bad(format!(
                "need 0 < sigma_min < sigma_max0 < inf, got {} and {}",
                self.sigma_min, self.sigma_max0
            ));
        }
        if !(self.tau > 1.0) || !self.tau.is_finite() {
            return bad(format!("tau must exceed 1, got {}", self.tau));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return bad(format!("c must be positive, got {}", self.c));
        }
        if !(self.p_min > 0.0 && self.p_min < 1.0) {
            return bad(format!("p_min must lie in (0, 1), got {}", self.p_min));
        }
        match self.line_search {
            LineSearch::Average { p } if !(p >= self.p_min && p <= 1.0) => {
                return bad(format!("p must lie in [p_min, 1] = [{}, 1], got {p}", self.p_min));
            }
            LineSearch::MaxType { window: 0 } => return bad("max-type window must be at least 1".into()),
            _ => {}
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.consec_required == 0 {
            return bad("consec_required must be at least 1".into());
        }
        if let Some(t) = self.max_time_sec {
            if !(t >= 0.0) {
                return bad(format!("max_time_sec must be nonnegative, got {t}"));
            }
        }
        Ok(())
    }
}

/// Why the solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    IterLimit,
    TimeLimit,
}

/// Iterates around one accepted step, kept in audit mode.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSnapshot {
    pub x_prev: DMatrix<f64>,
    pub y_prev: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// `R_k` the candidate was tested against.
    pub ref_prev: f64,
}

/// One accepted outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub elapsed_sec: f64,
    pub f_value: f64,
    pub ref_value: f64,
    pub relobj: f64,
    pub sym_gap: f64,
    pub stationarity_residual: f64,
    pub mu_bar: f64,
    pub sigma_bar: f64,
    pub inner_iterations: usize,
    pub mu_max: f64,
    /// `(α + 2γρ)||U||₂² + c` at the accepted `U`.
    pub sigma_max: f64,
    pub snapshot: Option<Box<StepSnapshot>>,
}

/// Mutable state of the outer loop.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub k: usize,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub f_value: f64,
    pub ref_value: f64,
    pub mu_bar: f64,
    pub sigma_bar: f64,
    pub consec_small: usize,
    pub elapsed_sec: f64,
    history: VecDeque<f64>,
}

impl SolverState {
    /// Starts from `(X⁰, Y⁰)` with `R_0 = F_λ(X⁰, Y⁰)`.
    pub fn new(spec: &ProblemSpec, config: &SolverConfig, x0: DMatrix<f64>, y0: DMatrix<f64>) -> Result<Self> {
        let f0 = f_lambda(spec, &x0, &y0)?.finite().ok_or(Error::Infeasible("the starting point"))?;
        let mut history = VecDeque::new();
        history.push_back(f0);
        Ok(SolverState {
            k: 0,
            x: x0,
            y: y0,
            f_value: f0,
            ref_value: f0,
            mu_bar: config.mu_min,
            sigma_bar: config.sigma_min,
            consec_small: 0,
            elapsed_sec: 0.0,
            history,
        })
    }
}

/// Uniform(0,1) starting factors: `X⁰` then `Y⁰`, each filled column-major.
pub fn random_init(n: usize, r: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let v: Vec<f64> = (0..n * r).map(|_| rng.random::<f64>()).collect();
        DMatrix::from_column_slice(n, r, &v)
    };
    let x = draw();
    let y = draw();
    (x, y)
}

/// Next reference value. `history` holds recent objective values and is
/// updated in place (only used by the max-type rule).
pub fn reference_value_update(mode: LineSearch, r_k: f64, f_new: f64, history: &mut VecDeque<f64>) -> Result<f64> {
    history.push_back(f_new);
    match mode {
        LineSearch::Average { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidParameter(format!("p must lie in (0, 1], got {p}")));
            }
            while history.len() > 1 {
                history.pop_front();
            }
            // Written as R − p(R − F) so that F ≤ R implies the result ≤ R in floating point.
            Ok(r_k - p * (r_k - f_new))
        }
        LineSearch::MaxType { window } => {
            while history.len() > window + 1 {
                history.pop_front();
            }
            Ok(history.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        }
    }
}

/// `2·max{1, ⌊log(μmax/μmin)/log τ + 2⌋} + 2`, the per-iteration bound on
/// candidate evaluations.
pub fn inner_iteration_budget(mu_max: f64, mu_min: f64, tau: f64) -> usize {
    2 * phase_length(mu_max, mu_min, tau) + 2
}

fn phase_length(cap: f64, floor: f64, tau: f64) -> usize {
    let steps = ((cap.ln() - floor.ln()) / tau.ln() + 2.0).floor();
    if steps.is_finite() && steps > 1.0 {
        steps as usize
    } else {
        1
    }
}

struct Candidate {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    f: f64,
    moved: f64,
}

fn evaluate(
    spec: &ProblemSpec,
    config: &SolverConfig,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    u: &DMatrix<f64>,
    v: DMatrix<f64>,
) -> Result<Candidate> {
    if config.cached_objective && spec.is_snmf() {
        let ut = TrackedMatrix::new(u.clone());
        let vt = TrackedMatrix::new(v);
        let cache = GramCache::build(spec, x, y, &ut, &vt)?;
        let f = snmf_objective_cached(&cache, spec, &ut, &vt)?.to_f64();
        let (du, dv) = cache.step_sizes();
        return Ok(Candidate { u: u.clone(), v: vt.get().clone(), f, moved: du + dv });
    }
    let f = f_lambda(spec, u, &v)?.to_f64();
    let moved = dist2(u, x) + dist2(&v, y);
    Ok(Candidate { u: u.clone(), v, f, moved })
}

fn singular_as_none<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Singular(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// One outer iteration. On success the state holds the accepted iterate.
pub fn step(
    state: &mut SolverState,
    spec: &ProblemSpec,
    params: &RelaxationParams,
    config: &SolverConfig,
) -> Result<IterationRecord> {
    let started = Instant::now();
    let coef = params.curvature();
    let (c, tau) = (config.c, config.tau);
    let r_k = state.ref_value;
    let roundoff = 1e-10 * (1.0 + r_k.abs());

    let z = ZOperator::new(spec, params, &state.x, &state.y)?;
    let mu_max = coef * spectral_norm_sq(&state.y) + c;
    let mut mu = (0.1 * state.mu_bar).max(config.mu_min);
    let mut sigma = (0.1 * state.sigma_bar).max(config.sigma_min).min(config.sigma_max0);
    let mut sigma_max = f64::NAN;
    let mut u: Option<DMatrix<f64>> = None;
    let mut redo_u = true;
    let mut inner = 0usize;

    let accepted = loop {
        if redo_u {
            mu = mu.min(mu_max);
            u = singular_as_none(update_u(spec, params, config.scheme, &z, &state.x, &state.y, mu))?;
        }
        inner += 1;
        let candidate = match &u {
            Some(u) => match singular_as_none(update_v(spec, params, config.scheme, &z, u, &state.y, sigma))? {
                Some(v) => Some(evaluate(spec, config, &state.x, &state.y, u, v)?),
                None => None,
            },
            None => None,
        };
        let slack = candidate.as_ref().map(|cand| (cand.f - r_k) + 0.5 * c * cand.moved);
        if let Some(s) = slack {
            if s <= 0.0 {
                break candidate.unwrap();
            }
        }

        let at_caps = mu == mu_max && sigma == sigma_max;
        if at_caps {
            match slack {
                Some(s) if s <= roundoff => {
                    log::debug!("iteration {}: accepted at the caps within roundoff ({s:e})", state.k + 1);
                    break candidate.unwrap();
                }
                _ => {
                    return Err(Error::InvariantViolation(format!(
                        "iteration {}: candidate rejected with mu = mu_max = {mu_max:e} and sigma = sigma_max = {sigma_max:e} (excess {slack:?})",
                        state.k + 1
                    )))
                }
            }
        }

        let guard = inner_iteration_budget(mu_max, config.mu_min, tau)
            + if sigma_max.is_finite() { phase_length(sigma_max, config.sigma_min, tau) } else { 0 };
        if inner >= guard {
            return Err(Error::InvariantViolation(format!(
                "iteration {}: line search exceeded {guard} inner iterations",
                state.k + 1
            )));
        }

        if mu == mu_max {
            let u_ref = u.as_ref().ok_or_else(|| {
                Error::Singular(format!("factor subproblem is singular at mu = mu_max = {mu_max:e}"))
            })?;
            sigma_max = coef * spectral_norm_sq(u_ref) + c;
            sigma = (tau * sigma).min(sigma_max);
            redo_u = false;
        } else {
            mu *= tau;
            sigma *= tau;
            redo_u = true;
        }
    };
    drop(z);

    let Candidate { u, v, f, .. } = accepted;
    let sigma_max_at_u = if sigma_max.is_finite() { sigma_max } else { coef * spectral_norm_sq(&u) + c };
    let f_prev = state.f_value;
    let ref_next = reference_value_update(config.line_search, r_k, f, &mut state.history)?;
    if let LineSearch::Average { .. } = config.line_search {
        let tol = 1e-12 * (1.0 + r_k.abs());
        if ref_next > r_k + tol || f > ref_next + roundoff {
            return Err(Error::InvariantViolation(format!(
                "reference value out of order: R_k = {r_k:e}, R_k+1 = {ref_next:e}, F = {f:e}"
            )));
        }
    }

    let snapshot = config.audit.then(|| {
        Box::new(StepSnapshot {
            x_prev: state.x.clone(),
            y_prev: state.y.clone(),
            x: u.clone(),
            y: v.clone(),
            ref_prev: r_k,
        })
    });

    state.k += 1;
    state.x = u;
    state.y = v;
    state.f_value = f;
    state.ref_value = ref_next;
    state.mu_bar = mu;
    state.sigma_bar = sigma;
    let change = (f - f_prev).abs() / (f.abs() + 1.0);
    state.consec_small = if change <= config.tol { state.consec_small + 1 } else { 0 };
    state.elapsed_sec += started.elapsed().as_secs_f64();

    Ok(IterationRecord {
        k: state.k,
        elapsed_sec: if config.record_elapsed { state.elapsed_sec } else { 0.0 },
        f_value: f,
        ref_value: ref_next,
        relobj: relobj_from_value(spec, f).unwrap_or(f64::NAN),
        sym_gap: symmetry_gap(&state.x, &state.y)?,
        stationarity_residual: stationarity_residual(spec, &state.x, &state.y)?,
        mu_bar: mu,
        sigma_bar: sigma,
        inner_iterations: inner,
        mu_max,
        sigma_max: sigma_max_at_u,
        snapshot,
    })
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub trace: Vec<IterationRecord>,
    pub status: Status,
    pub initial_f: f64,
    pub initial_relobj: f64,
}

impl SolveResult {
    pub fn final_f(&self) -> f64 {
        self.trace.last().map_or(self.initial_f, |r| r.f_value)
    }

    pub fn final_relobj(&self) -> f64 {
        self.trace.last().map_or(self.initial_relobj, |r| r.relobj)
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Runs outer iterations until the relative change in `F_λ` stays below
/// `tol` for `consec_required` consecutive iterations, or a limit is hit.
/// Limits are checked first. Without `init`, starts from [`random_init`].
pub fn solve(
    spec: &ProblemSpec,
    params: &RelaxationParams,
    config: &SolverConfig,
    init: Option<(DMatrix<f64>, DMatrix<f64>)>,
) -> Result<SolveResult> {
    config.validate()?;
    let (x0, y0) = init.unwrap_or_else(|| random_init(spec.n(), spec.rank(), config.seed));
    let mut state = SolverState::new(spec, config, x0, y0)?;
    let initial_f = state.f_value;
    let initial_relobj = relobj_from_value(spec, initial_f).unwrap_or(f64::NAN);
    let mut trace = Vec::new();
    let status = loop {
        if state.k >= config.max_iters {
            break Status::IterLimit;
        }
        if let Some(limit) = config.max_time_sec {
            if state.elapsed_sec >= limit {
                break Status::TimeLimit;
            }
        }
        let record = step(&mut state, spec, params, config)?;
        log::trace!(
            "k={} F={:.12e} R={:.12e} mu={:e} sigma={:e} inner={}",
            record.k,
            record.f_value,
            record.ref_value,
            record.mu_bar,
            record.sigma_bar,
            record.inner_iterations
        );
        trace.push(record);
        if state.consec_small >= config.consec_required {
            break Status::Converged;
        }
    };
    log::debug!("stopped after {} iterations: {status:?}", state.k);
    Ok(SolveResult { x: state.x, y: state.y, trace, status, initial_f, initial_relobj })
}
