//! Regularizers `Ψ` and `Φ`: evaluation, proximal maps and the metadata the
//! solver and diagnostics need (weak-convexity modulus, column separability).

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::ExtReal;

/// A proper, closed, bounded-below function on `n×r` matrices with a
/// computable proximal map.
///
/// Implement this to plug in a regularizer that is not built in. Nonconvex
/// choices must report their weak-convexity modulus through [`kappa`]
/// (the smallest `κ ≥ 0` with `h + κ/2·||·||²` convex); it enters the exact
/// penalty threshold.
///
/// [`kappa`]: Regularizer::kappa
pub trait Regularizer: Debug + Send + Sync {
    fn eval(&self, x: &DMatrix<f64>) -> ExtReal;

    /// A minimizer of `h(X) + 1/(2t)·||X − W||²`.
    fn prox(&self, w: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>>;

    /// Prox of the column term `h_i` when `h(X) = Σ h_i(x_i)`.
    fn prox_column(&self, column: usize, w: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let _ = (column, w, t);
        Err(Error::Unsupported(format!("{self:?} is not column-separable")))
    }

    fn kappa(&self) -> f64;

    fn column_separable(&self) -> bool;

    /// Downcast hook used for structural equality and the closed-form paths.
    fn as_builtin(&self) -> Option<&Builtin> {
        None
    }
}

/// The built-in, convex, column-separable regularizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Builtin {
    Zero,
    /// Indicator of the nonnegative orthant.
    #[serde(alias = "nonneg")]
    NonnegIndicator,
    /// `w·Σ|x_ij|`.
    L1 { weight: f64 },
    /// Nonnegativity plus `w·Σ x_ij`.
    #[serde(alias = "nonneg_l1")]
    NonnegPlusL1 { weight: f64 },
}

impl Builtin {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Builtin::L1 { weight } | Builtin::NonnegPlusL1 { weight } if !(weight >= 0.0) => {
                Err(Error::InvalidParameter(format!(
                    "regularizer weight must be nonnegative, got {weight}"
                )))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    fn prox_scalar(&self, v: f64, t: f64) -> f64 {
        match *self {
            Builtin::Zero => v,
            Builtin::NonnegIndicator => v.max(0.0),
            Builtin::L1 { weight } => {
                let thr = weight * t;
                if v > thr {
                    v - thr
                } else if v < -thr {
                    v + thr
                } else {
                    0.0
                }
            }
            Builtin::NonnegPlusL1 { weight } => (v - weight * t).max(0.0),
        }
    }

    pub(crate) fn prox_in_place(&self, values: &mut [f64], t: f64) {
        if matches!(self, Builtin::Zero) {
            return;
        }
        for v in values {
            *v = self.prox_scalar(*v, t);
        }
    }

    fn eval_slice(&self, values: &[f64]) -> ExtReal {
        match *self {
            Builtin::Zero => ExtReal::ZERO,
            Builtin::NonnegIndicator => {
                if values.iter().all(|&v| v >= 0.0) {
                    ExtReal::ZERO
                } else {
                    ExtReal::PosInfinity
                }
            }
            Builtin::L1 { weight } => ExtReal::Finite(weight * values.iter().map(|v| v.abs()).sum::<f64>()),
            Builtin::NonnegPlusL1 { weight } => {
                if values.iter().all(|&v| v >= 0.0) {
                    ExtReal::Finite(weight * values.iter().sum::<f64>())
                } else {
                    ExtReal::PosInfinity
                }
            }
        }
    }
}

fn check_step(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("prox step must be positive and finite, got {t}")))
    }
}

impl Regularizer for Builtin {
    fn eval(&self, x: &DMatrix<f64>) -> ExtReal {
        self.eval_slice(x.as_slice())
    }

    fn prox(&self, w: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        check_step(t)?;
        let mut out = w.clone();
        self.prox_in_place(out.as_mut_slice(), t);
        Ok(out)
    }

    fn prox_column(&self, _column: usize, w: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        check_step(t)?;
        let mut out = w.clone();
        self.prox_in_place(out.as_mut_slice(), t);
        Ok(out)
    }

    fn kappa(&self) -> f64 {
        0.0
    }

    fn column_separable(&self) -> bool {
        true
    }

    fn as_builtin(&self) -> Option<&Builtin> {
        Some(self)
    }
}

/// Structural equality of two regularizers, as far as it can be decided:
/// equal built-ins, or the very same custom object.
pub fn same_regularizer(a: &dyn Regularizer, b: &dyn Regularizer) -> bool {
    match (a.as_builtin(), b.as_builtin()) {
        (Some(x), Some(y)) => x == y,
        (None, None) => std::ptr::addr_eq(a as *const dyn Regularizer, b as *const dyn Regularizer),
        _ => false,
    }
}
