//! Computable certificates: stationarity and symmetry measures, the exact
//! penalty threshold, the relaxation identity, per-step descent audits and
//! optimality residuals of the factor updates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, dist2, min_eigenvalue_symmetric, spectral_norm_power, spectral_norm_sq};
use crate::objective::{f_lambda, theta, z_star, ProblemSpec, RelaxationParams};
use crate::regularizers::{same_regularizer, Regularizer};
use crate::solver::{IterationRecord, Scheme, SolverConfig};

/// Prox-gradient mapping norm with unit step,
/// `||X − prox_Ψ(X − ∇_X)|| + ||Y − prox_Φ(Y − ∇_Y)||`.
pub fn stationarity_residual(spec: &ProblemSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    if !f_lambda(spec, x, y)?.is_finite() {
        return Err(Error::Infeasible("stationarity_residual"));
    }
    let resid = spec.residual_matrix(x, y);
    let diff = x - y;
    let gx = &resid * y + &diff * spec.lambda();
    let gy = resid.tr_mul(x) - &diff * spec.lambda();
    let px = spec.psi().prox(&(x - gx), 1.0)?;
    let py = spec.phi().prox(&(y - gy), 1.0)?;
    Ok(dist2(x, &px).sqrt() + dist2(y, &py).sqrt())
}

/// `||X − Y||_F²`.
pub fn symmetry_gap(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::shape("symmetry_gap", x.shape(), y.shape()));
    }
    Ok(dist2(x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyThreshold {
    pub threshold: f64,
    pub satisfied: bool,
}

/// `(||A*A(XYᵀ)||₂ + κ − λ_min(A*b))/2`; `λ` above it forces `X = Y` at
/// stationary points. Requires `Ψ = Φ` and a symmetric `A*b`.
pub fn exact_penalty_threshold(spec: &ProblemSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<PenaltyThreshold> {
    spec.check_factors(x, y, "exact_penalty_threshold")?;
    if !same_regularizer(spec.psi(), spec.phi()) {
        return Err(Error::Precondition("the penalty threshold needs Psi = Phi".into()));
    }
    let target = spec.target();
    let skew = asymmetry(target);
    if skew > 1e-10 * (1.0 + target.amax()) {
        return Err(Error::Precondition(format!("A*(b) is not symmetric (max asymmetry {skew:e})")));
    }
    let mut product = x * y.transpose();
    spec.map().gram_apply_in_place(&mut product);
    let norm = spectral_norm_power(&product, 1e-10, 10_000).value;
    let threshold = 0.5 * (norm + spec.phi().kappa() - min_eigenvalue_symmetric(target));
    Ok(PenaltyThreshold { threshold, satisfied: spec.lambda() > threshold })
}

/// `|Θ(X, Y, Z*(X, Y)) − F_λ(X, Y)|`.
pub fn relaxation_consistency(
    spec: &ProblemSpec,
    params: &RelaxationParams,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<f64> {
    let z = z_star(spec, params, x, y)?;
    let t = theta(spec, params, x, y, &z)?;
    let f = f_lambda(spec, x, y)?;
    match (t.finite(), f.finite()) {
        (Some(a), Some(b)) => Ok((a - b).abs()),
        (None, None) => Ok(0.0),
        _ => Ok(f64::INFINITY),
    }
}

/// Counts accepted steps in an audited trace that break the acceptance test
/// or, at both caps, the sufficient-descent inequality
///
/// ```text
/// F(U,V) − F(X,Y) ≤ −(μ − κ||Y||₂²)/2·||U − X||² − (σ − κ||U||₂²)/2·||V − Y||²,   κ = α + 2γρ
/// ```
///
/// A recorded `F` that disagrees with the snapshot also counts. Tolerance is
/// `1e−8·(1 + |F|)`.
pub fn descent_audit(
    trace: &[IterationRecord],
    spec: &ProblemSpec,
    params: &RelaxationParams,
    config: &SolverConfig,
) -> Result<usize> {
    let coef = params.curvature();
    let mut violations = 0;
    for rec in trace {
        let snap = rec
            .snapshot
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("record {} has no audit snapshot", rec.k)))?;
        let f_new = f_lambda(spec, &snap.x, &snap.y)?.to_f64();
        let f_prev = f_lambda(spec, &snap.x_prev, &snap.y_prev)?.to_f64();
        let tol = 1e-8 * (1.0 + f_new.abs());
        let dx = dist2(&snap.x, &snap.x_prev);
        let dy = dist2(&snap.y, &snap.y_prev);
        let mut ok = (rec.f_value - f_new).abs() <= tol;
        ok &= rec.f_value - snap.ref_prev <= -0.5 * config.c * (dx + dy) + tol;
        if rec.mu_bar == rec.mu_max && rec.sigma_bar == rec.sigma_max {
            let bound = -0.5 * (rec.mu_bar - coef * spectral_norm_sq(&snap.y_prev)) * dx
                - 0.5 * (rec.sigma_bar - coef * spectral_norm_sq(&snap.x)) * dy;
            ok &= rec.f_value - f_prev <= bound + tol;
        }
        if !ok {
            log::debug!("descent audit: step {} violates its inequalities", rec.k);
            violations += 1;
        }
    }
    Ok(violations)
}

/// Optimality residual of a `U` produced by [`update_u`](crate::solver::update_u)
/// from `(X, Y)` with weight `μ`, using a dense `Z*` as reference.
///
/// The residual is the prox-gradient mapping of the scheme's subproblem at
/// `U`, with the scheme's own step; it vanishes exactly at the subproblem
/// solution (column by column for the hierarchical scheme).
#[allow(clippy::too_many_arguments)]
pub fn update_u_residual(
    spec: &ProblemSpec,
    params: &RelaxationParams,
    scheme: Scheme,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    u: &DMatrix<f64>,
    mu: f64,
) -> Result<f64> {
    spec.check_factors(x, y, "update_u_residual")?;
    let z = z_star(spec, params, x, y)?;
    let side = Side { z: &z, anchor: x, coupled: y };
    side.residual(spec.psi(), params.alpha(), spec.lambda(), scheme, u, mu)
}

/// Optimality residual of a `V` produced by [`update_v`](crate::solver::update_v)
/// from `(X, Y)`, the accepted `U`, and weight `σ`.
#[allow(clippy::too_many_arguments)]
pub fn update_v_residual(
    spec: &ProblemSpec,
    params: &RelaxationParams,
    scheme: Scheme,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    sigma: f64,
) -> Result<f64> {
    spec.check_factors(x, y, "update_v_residual")?;
    let z = z_star(spec, params, x, y)?.transpose();
    let side = Side { z: &z, anchor: y, coupled: u };
    side.residual(spec.phi(), params.alpha(), spec.lambda(), scheme, v, sigma)
}

/// One block subproblem in the form
/// `min_W h(W) + α/2||W Cᵀ − Z||² + λ/2||W − C||² + w/2||W − A||²`
/// with `C` the coupled factor and `A` the previous value of `W`.
struct Side<'a> {
    z: &'a DMatrix<f64>,
    anchor: &'a DMatrix<f64>,
    coupled: &'a DMatrix<f64>,
}

impl Side<'_> {
    fn residual(
        &self,
        reg: &dyn Regularizer,
        alpha: f64,
        lambda: f64,
        scheme: Scheme,
        w: &DMatrix<f64>,
        weight: f64,
    ) -> Result<f64> {
        let (a, cpl) = (self.anchor, self.coupled);
        let penalty = (w - cpl) * lambda + (w - a) * weight;
        match scheme {
            Scheme::Proximal | Scheme::ProxLinear => {
                // Proximal keeps the exact coupling at W; prox-linear freezes it at A.
                let at = if scheme == Scheme::Proximal { w } else { a };
                let g = (at * cpl.transpose() - self.z) * cpl * alpha + penalty;
                let t = 1.0 / (lambda + weight);
                let p = reg.prox(&(w - &g * t), t)?;
                Ok(dist2(w, &p).sqrt())
            }
            Scheme::Hierarchical => {
                let mut total = 0.0;
                let mut mixed = a.clone();
                for i in 0..w.ncols() {
                    mixed.set_column(i, &w.column(i));
                    let ci = cpl.column(i);
                    let g: DVector<f64> = (&mixed * cpl.transpose() - self.z) * ci * alpha
                        + (w.column(i) - ci) * lambda
                        + (w.column(i) - a.column(i)) * weight;
                    let t = 1.0 / (alpha * ci.norm_squared() + lambda + weight);
                    let wi: DVector<f64> = w.column(i).into_owned();
                    let p = reg.prox_column(i, &(&wi - g * t), t)?;
                    total += (wi - p).norm_squared();
                }
                Ok(total.sqrt())
            }
        }
    }
}

/// Aggregated certificates for one final iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub stationarity_residual: f64,
    pub sym_gap: f64,
    /// `None` when the theorem's preconditions do not hold.
    pub penalty_threshold: Option<f64>,
    pub penalty_satisfied: Option<bool>,
    pub relaxation_gap: f64,
    /// `None` when the trace has no audit snapshots.
    pub descent_violations: Option<usize>,
}

pub fn report(
    spec: &ProblemSpec,
    params: &RelaxationParams,
    config: &SolverConfig,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    trace: &[IterationRecord],
) -> Result<DiagnosticsReport> {
    let penalty = match exact_penalty_threshold(spec, x, y) {
        Ok(p) => Some(p),
        Err(Error::Precondition(msg)) => {
            log::info!("penalty threshold skipped: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    let audited = !trace.is_empty() && trace.iter().all(|r| r.snapshot.is_some());
    Ok(DiagnosticsReport {
        stationarity_residual: stationarity_residual(spec, x, y)?,
        sym_gap: symmetry_gap(x, y)?,
        penalty_threshold: penalty.map(|p| p.threshold),
        penalty_satisfied: penalty.map(|p| p.satisfied),
        relaxation_gap: relaxation_consistency(spec, params, x, y)?,
        descent_violations: if audited { Some(descent_audit(trace, spec, params, config)?) } else { None },
    })
}
