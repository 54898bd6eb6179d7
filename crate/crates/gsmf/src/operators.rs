//! Measurement maps `A: R^{n×n} → R^q` with `AA* = I_q`.
//!
//! Two maps are provided: full column-major vectorization (`q = n²`) and
//! symmetric entry sampling on an index set `Ω`. Both are selections of
//! entries, so `A(A*(v)) = v` holds bit for bit and `A*A` is an orthogonal
//! projector whose eigenvalues lie in `{0, 1}`. That spectral fact is what
//! makes [`LinearMap::shifted_inverse_apply`], [`rho`] and [`gamma_min`]
//! closed-form.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// A validated symmetric index set `Ω ⊆ {1..n}²`.
///
/// Pairs are stored 0-based and ordered by column first, then by row, which
/// is the order in which sampled entries appear in `A(U)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSet {
    n: usize,
    pairs: Vec<(usize, usize)>,
    mask: Vec<bool>,
}

impl SamplingSet {
    /// Builds a sampling set from 1-based `(row, col)` pairs.
    ///
    /// The pairs must already be sorted by `(col, row)`, contain no
    /// duplicates, and be closed under transposition. Nothing is repaired:
    /// an unsorted or asymmetric list is an error.
    pub fn new(n: usize, pairs_one_based: &[(usize, usize)]) -> Result<Self> {
        let mut pairs = Vec::with_capacity(pairs_one_based.len());
        for (idx, &(i, j)) in pairs_one_based.iter().enumerate() {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(Error::InvalidSampling(format!(
                    "pair #{} ({i},{j}) is outside 1..={n}",
                    idx + 1
                )));
            }
            pairs.push((i - 1, j - 1));
        }
        for (idx, w) in pairs.windows(2).enumerate() {
            let (a, b) = ((w[0].1, w[0].0), (w[1].1, w[1].0));
            if a == b {
                return Err(Error::InvalidSampling(format!(
                    "duplicate pair ({},{}) at position {}",
                    w[1].0 + 1,
                    w[1].1 + 1,
                    idx + 2
                )));
            }
            if a > b {
                return Err(Error::InvalidSampling(format!(
                    "pairs are not sorted by (column, row) at position {}: ({},{}) follows ({},{})",
                    idx + 2,
                    w[1].0 + 1,
                    w[1].1 + 1,
                    w[0].0 + 1,
                    w[0].1 + 1
                )));
            }
        }
        let mut mask = vec![false; n * n];
        for &(i, j) in &pairs {
            mask[i + j * n] = true;
        }
        for &(i, j) in &pairs {
            if !mask[j + i * n] {
                return Err(Error::InvalidSampling(format!(
                    "({},{}) is sampled but its mirror ({},{}) is not",
                    i + 1,
                    j + 1,
                    j + 1,
                    i + 1
                )));
            }
        }
        Ok(SamplingSet { n, pairs, mask })
    }

    /// Symmetric closure of an arbitrary pair list, sorted and deduplicated.
    ///
    /// This is a convenience for building sets programmatically; file input
    /// goes through the strict [`SamplingSet::new`].
    pub fn symmetric_closure(n: usize, pairs_one_based: &[(usize, usize)]) -> Result<Self> {
        let mut all: Vec<(usize, usize)> = Vec::with_capacity(2 * pairs_one_based.len());
        for &(i, j) in pairs_one_based {
            all.push((i, j));
            all.push((j, i));
        }
        all.sort_by_key(|&(i, j)| (j, i));
        all.dedup();
        Self::new(n, &all)
    }

    /// Random symmetric set: each entry on or above the diagonal is kept with
    /// probability `density`, together with its mirror.
    pub fn random<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::InvalidParameter(format!("density {density} not in [0, 1]")));
        }
        let mut pairs = Vec::new();
        for j in 1..=n {
            for i in 1..=j {
                if rng.random::<f64>() < density {
                    pairs.push((i, j));
                }
            }
        }
        Self::symmetric_closure(n, &pairs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// 0-based `(row, col)` pairs in storage order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// 1-based pairs, the form used in files.
    pub fn pairs_one_based(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|&(i, j)| (i + 1, j + 1))
    }

    /// Whether the 0-based entry `(i, j)` is sampled.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[i + j * self.n]
    }

    fn mask(&self) -> &[bool] {
        &self.mask
    }
}

/// A linear map `A: R^{n×n} → R^q` satisfying `AA* = I_q`.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearMap {
    /// Column-major vectorization, `q = n²`.
    FullVectorization { n: usize },
    /// Entry sampling on a symmetric set `Ω`, `q = |Ω|`.
    SymmetricSampling(SamplingSet),
}

impl LinearMap {
    pub fn full(n: usize) -> Self {
        LinearMap::FullVectorization { n }
    }

    pub fn sampling(set: SamplingSet) -> Self {
        LinearMap::SymmetricSampling(set)
    }

    pub fn n(&self) -> usize {
        match self {
            LinearMap::FullVectorization { n } => *n,
            LinearMap::SymmetricSampling(s) => s.n(),
        }
    }

    pub fn q(&self) -> usize {
        match self {
            LinearMap::FullVectorization { n } => n * n,
            LinearMap::SymmetricSampling(s) => s.len(),
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, LinearMap::FullVectorization { .. })
    }

    fn check_square(&self, u: &DMatrix<f64>, context: &'static str) -> Result<()> {
        let n = self.n();
        if u.shape() != (n, n) {
            return Err(Error::shape(context, (n, n), u.shape()));
        }
        Ok(())
    }

    /// `A(U)`.
    pub fn apply(&self, u: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_square(u, "LinearMap::apply")?;
        Ok(match self {
            LinearMap::FullVectorization { .. } => DVector::from_column_slice(u.as_slice()),
            LinearMap::SymmetricSampling(s) => {
                DVector::from_iterator(s.len(), s.pairs().iter().map(|&(i, j)| u[(i, j)]))
            }
        })
    }

    /// `A*(v)`.
    pub fn adjoint(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        if v.len() != self.q() {
            return Err(Error::length("LinearMap::adjoint", self.q(), v.len()));
        }
        let n = self.n();
        Ok(match self {
            LinearMap::FullVectorization { .. } => DMatrix::from_column_slice(n, n, v.as_slice()),
            LinearMap::SymmetricSampling(s) => {
                let mut out = DMatrix::zeros(n, n);
                for (&(i, j), &val) in s.pairs().iter().zip(v.iter()) {
                    out[(i, j)] = val;
                }
                out
            }
        })
    }

    /// `A*A(U)`.
    pub fn gram_apply(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_square(u, "LinearMap::gram_apply")?;
        let mut out = u.clone();
        self.gram_apply_in_place(&mut out);
        Ok(out)
    }

    /// `U ← A*A(U)`; the caller guarantees `U` is `n×n`.
    pub(crate) fn gram_apply_in_place(&self, u: &mut DMatrix<f64>) {
        if let LinearMap::SymmetricSampling(s) = self {
            for (val, &keep) in u.as_mut_slice().iter_mut().zip(s.mask()) {
                if !keep {
                    *val = 0.0;
                }
            }
        }
    }

    /// `(αI + βA*A)⁻¹(W) = W/α − β/(α(α+β))·A*A(W)`.
    pub fn shifted_inverse_apply(
        &self,
        alpha: f64,
        beta: f64,
        w: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        self.check_square(w, "LinearMap::shifted_inverse_apply")?;
        let denom = alpha * (alpha + beta);
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Singular(format!(
                "αI + βA*A is singular for α = {alpha}, β = {beta}"
            )));
        }
        let mut projected = w.clone();
        self.gram_apply_in_place(&mut projected);
        Ok(w / alpha - projected * (beta / denom))
    }

    /// `A(XYᵀ)` without forming `XYᵀ` when only sampled entries are needed.
    pub(crate) fn apply_product(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DVector<f64> {
        match self {
            LinearMap::FullVectorization { .. } => {
                let p = x * y.transpose();
                DVector::from_column_slice(p.as_slice())
            }
            LinearMap::SymmetricSampling(s) => DVector::from_iterator(
                s.len(),
                s.pairs().iter().map(|&(i, j)| x.row(i).dot(&y.row(j))),
            ),
        }
    }
}

/// `ρ = ||I − β/(α+β)·A*A||² = max{1, α²/(α+β)²}` for a partial isometry.
pub fn rho(alpha: f64, beta: f64) -> Result<f64> {
    let s = alpha + beta;
    if s == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rho undefined: alpha + beta = 0 (alpha = {alpha}, beta = {beta})"
        )));
    }
    Ok(f64::max(1.0, (alpha * alpha) / (s * s)))
}

/// Smallest `γ ≥ 0` with `(α+γ)I + βA*A ⪰ 0`, i.e. `max{0, −α, −(α+β)}`.
pub fn gamma_min(alpha: f64, beta: f64) -> f64 {
    0.0f64.max(-alpha).max(-(alpha + beta))
}
