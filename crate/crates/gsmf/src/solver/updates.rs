//! Factor updates for the three schemes, against a matrix-free `Z*`.

use nalgebra::{Cholesky, DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{ProblemSpec, RelaxationParams};
use crate::operators::LinearMap;
use crate::regularizers::{Builtin, Regularizer};

/// How each factor is updated inside an outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact proximal step; needs `Ψ = Φ = 0`.
    Proximal,
    /// Linearize the coupling term, then take a prox step.
    #[serde(alias = "prox_linear", alias = "proxlinear")]
    ProxLinear,
    /// Column-by-column exact minimization (HALS style).
    Hierarchical,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Proximal => "proximal",
            Scheme::ProxLinear => "prox_linear",
            Scheme::Hierarchical => "hierarchical",
        })
    }
}

#[derive(Debug, Clone)]
enum Correction<'a> {
    /// `s·M` for full vectorization.
    Dense { weight: f64, m: &'a DMatrix<f64> },
    /// `−s·(⟨x_i, y_j⟩ − b_ij)` on the sampled pairs.
    Sparse(Vec<(usize, usize, f64)>),
}

/// `Z*(X, Y)` stored as `a·XYᵀ + D`, so products with `n×r` blocks cost
/// `O(n r²)` plus the cost of `D`.
#[derive(Debug, Clone)]
pub struct ZOperator<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    scale: f64,
    correction: Correction<'a>,
}

impl<'a> ZOperator<'a> {
    pub fn new(
        spec: &'a ProblemSpec,
        params: &RelaxationParams,
        x: &'a DMatrix<f64>,
        y: &'a DMatrix<f64>,
    ) -> Result<Self> {
        spec.check_factors(x, y, "ZOperator::new")?;
        let s = params.target_weight();
        Ok(match spec.map() {
            LinearMap::FullVectorization { .. } => ZOperator {
                x,
                y,
                scale: 1.0 - s,
                correction: Correction::Dense { weight: s, m: spec.target() },
            },
            LinearMap::SymmetricSampling(set) => {
                let m = spec.target();
                let entries = set
                    .pairs()
                    .iter()
                    .map(|&(i, j)| (i, j, -s * (x.row(i).dot(&y.row(j)) - m[(i, j)])))
                    .collect();
                ZOperator { x, y, scale: 1.0, correction: Correction::Sparse(entries) }
            }
        })
    }

    /// `Z·W`.
    pub fn mul(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.x * (self.y.tr_mul(w)) * self.scale;
        match &self.correction {
            Correction::Dense { weight, m } => out.gemm(*weight, m, w, 1.0),
            Correction::Sparse(entries) => {
                for &(i, j, v) in entries {
                    for k in 0..w.ncols() {
                        out[(i, k)] += v * w[(j, k)];
                    }
                }
            }
        }
        out
    }

    /// `Zᵀ·W`.
    pub fn tr_mul(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.y * (self.x.tr_mul(w)) * self.scale;
        match &self.correction {
            Correction::Dense { weight, m } => out.gemm_tr(*weight, m, w, 1.0),
            Correction::Sparse(entries) => {
                for &(i, j, v) in entries {
                    for k in 0..w.ncols() {
                        out[(j, k)] += v * w[(i, k)];
                    }
                }
            }
        }
        out
    }

    /// Materialize `Z` as a dense `n×n` matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut z = self.x * self.y.transpose() * self.scale;
        match &self.correction {
            Correction::Dense { weight, m } => z += *m * *weight,
            Correction::Sparse(entries) => {
                for &(i, j, v) in entries {
                    z[(i, j)] += v;
                }
            }
        }
        z
    }
}

/// New `X` given `(X, Y)` and proximal weight `μ`.
pub fn update_u(
    spec: &ProblemSpec,
    params: &RelaxationParams,
    scheme: Scheme,
    z: &ZOperator<'_>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    mu: f64,
) -> Result<DMatrix<f64>> {
    spec.check_factors(x, y, "update_u")?;
    // Z·Y: the coupling term seen from the X side.
    let zy = z.mul(y);
    one_sided(spec.psi(), params.alpha(), spec.lambda(), scheme, &zy, x, y, mu)
}

/// New `Y` given the fresh `U`, the previous `Y` and proximal weight `σ`.
pub fn update_v(
    spec: &ProblemSpec,
    params: &RelaxationParams,
    scheme: Scheme,
    z: &ZOperator<'_>,
    u: &DMatrix<f64>,
    y: &DMatrix<f64>,
    sigma: f64,
) -> Result<DMatrix<f64>> {
    spec.check_factors(u, y, "update_v")?;
    let ztu = z.tr_mul(u);
    one_sided(spec.phi(), params.alpha(), spec.lambda(), scheme, &ztu, y, u, sigma)
}

/// Solves for the updated factor `W` (previous value `prev`) that is coupled
/// to the fixed factor `other` via `α/2·||W otherᵀ − Z_side||²`, where
/// `z_other = Z_side·other`, with penalty `λ/2·||W − other||²` and proximal
/// term `w/2·||W − prev||²`.
#[allow(clippy::too_many_arguments)]
fn one_sided(
    reg: &dyn Regularizer,
    alpha: f64,
    lambda: f64,
    scheme: Scheme,
    z_other: &DMatrix<f64>,
    prev: &DMatrix<f64>,
    other: &DMatrix<f64>,
    weight: f64,
) -> Result<DMatrix<f64>> {
    if !(weight > 0.0) || !weight.is_finite() {
        return Err(Error::InvalidParameter(format!("proximal weight must be positive, got {weight}")));
    }
    let gram = other.tr_mul(other);
    match scheme {
        Scheme::Proximal => {
            if reg.as_builtin() != Some(&Builtin::Zero) {
                return Err(Error::Unsupported(
                    "the proximal scheme needs zero regularizers; use prox_linear or hierarchical".into(),
                ));
            }
            let r = gram.nrows();
            let lhs = &gram * alpha + DMatrix::identity(r, r) * (lambda + weight);
            let rhs = z_other * alpha + other * lambda + prev * weight;
            solve_right(lhs, rhs)
        }
        Scheme::ProxLinear => {
            let total = lambda + weight;
            let g = (prev * &gram - z_other) * alpha;
            let w = (other * lambda + prev * weight - g) / total;
            reg.prox(&w, 1.0 / total)
        }
        Scheme::Hierarchical => {
            if !reg.column_separable() {
                return Err(Error::Unsupported(format!(
                    "hierarchical updates need a column-separable regularizer, got {reg:?}"
                )));
            }
            hierarchical(reg, alpha, lambda, z_other, prev, other, &gram, weight)
        }
    }
}

/// Solves `W·lhs = rhs` for symmetric `lhs`.
fn solve_right(lhs: DMatrix<f64>, rhs: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rhs_t = rhs.transpose();
    if let Some(ch) = Cholesky::new(lhs.clone()) {
        return Ok(ch.solve(&rhs_t).transpose());
    }
    LU::new(lhs)
        .solve(&rhs_t)
        .map(|s| s.transpose())
        .ok_or_else(|| Error::Singular("proximal system matrix is singular".into()))
}

#[allow(clippy::too_many_arguments)]
fn hierarchical(
    reg: &dyn Regularizer,
    alpha: f64,
    lambda: f64,
    z_other: &DMatrix<f64>,
    prev: &DMatrix<f64>,
    other: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    weight: f64,
) -> Result<DMatrix<f64>> {
    let (n, r) = prev.shape();
    let mut out = prev.clone();
    let builtin = reg.as_builtin().copied();
    let mut col = DVector::zeros(n);
    for i in 0..r {
        let denom = alpha * gram[(i, i)] + lambda + weight;
        if !(denom > 0.0) {
            return Err(Error::Singular(format!(
                "column {i} subproblem has nonpositive curvature {denom}"
            )));
        }
        // Columns before i are already updated, columns after i still hold
        // the previous iterate, so `out` supplies both.
        col.copy_from(&z_other.column(i));
        for j in 0..r {
            if j != i {
                col.axpy(-gram[(j, i)], &out.column(j), 1.0);
            }
        }
        col *= alpha;
        col.axpy(lambda, &other.column(i), 1.0);
        col.axpy(weight, &prev.column(i), 1.0);
        col /= denom;
        match builtin {
            Some(b) => b.prox_in_place(col.as_mut_slice(), 1.0 / denom),
            None => col = reg.prox_column(i, &col, 1.0 / denom)?,
        }
        out.set_column(i, &col);
    }
    Ok(out)
}
