//! The penalized objective `F_λ`, the relaxed potential `Θ_{α,β,λ}`, the
//! closed-form `Z` minimizer linking them, and the Gram-cached objective used
//! by the symmetric-NMF fast path.
//!
//! ```text
//! F_λ(X,Y)   = Ψ(X) + Φ(Y) + ½||A(XYᵀ) − b||² + λ/2·||X − Y||²
//! Θ(X,Y,Z)   = Ψ(X) + Φ(Y) + α/2·||XYᵀ − Z||² + β/2·||A(Z) − b||² + λ/2·||X − Y||²
//! Z*(X,Y)    = (I − s·A*A)(XYᵀ) + s·A*(b),   s = β/(α+β)
//! ```
//!
//! With `AA* = I` and `1/α + 1/β = 1`, `Θ(X, Y, Z*(X,Y)) = F_λ(X, Y)`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::extended::ExtReal;
use crate::linalg::{dist2, frob2};
use crate::operators::{gamma_min, rho, LinearMap};
use crate::regularizers::{Builtin, Regularizer};

/// One instance of the generalized symmetric factorization model.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    map: LinearMap,
    b: DVector<f64>,
    psi: Arc<dyn Regularizer>,
    phi: Arc<dyn Regularizer>,
    lambda: f64,
    rank: usize,
    // A*(b), materialized once.
    target: DMatrix<f64>,
}

impl ProblemSpec {
    pub fn new(
        map: LinearMap,
        b: DVector<f64>,
        psi: Arc<dyn Regularizer>,
        phi: Arc<dyn Regularizer>,
        lambda: f64,
        rank: usize,
    ) -> Result<Self> {
        let n = map.n();
        if rank == 0 || rank > n {
            return Err(Error::InvalidParameter(format!("rank must satisfy 1 <= r <= n = {n}, got {rank}")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if b.len() != map.q() {
            return Err(Error::length("ProblemSpec::new (b)", map.q(), b.len()));
        }
        if let Some(bad) = b.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("b contains a non-finite entry {bad}")));
        }
        for reg in [&psi, &phi] {
            if let Some(builtin) = reg.as_builtin() {
                builtin.validate()?;
            }
        }
        let target = map.adjoint(&b)?;
        Ok(ProblemSpec { map, b, psi, phi, lambda, rank, target })
    }

    /// Symmetric NMF: full vectorization of `M`, nonnegativity on both factors.
    pub fn snmf(m: &DMatrix<f64>, rank: usize, lambda: f64) -> Result<Self> {
        Self::factorization(m, rank, lambda, Builtin::NonnegIndicator, Builtin::NonnegIndicator)
    }

    /// Full-vectorization instance with the given built-in regularizers.
    pub fn factorization(
        m: &DMatrix<f64>,
        rank: usize,
        lambda: f64,
        psi: Builtin,
        phi: Builtin,
    ) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::shape("ProblemSpec (target)", (m.nrows(), m.nrows()), m.shape()));
        }
        let map = LinearMap::full(m.nrows());
        let b = map.apply(m)?;
        Self::new(map, b, Arc::new(psi), Arc::new(phi), lambda, rank)
    }

    /// Same problem with a different penalty parameter.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.map.clone(), self.b.clone(), self.psi.clone(), self.phi.clone(), lambda, self.rank)
    }

    pub fn map(&self) -> &LinearMap {
        &self.map
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn psi(&self) -> &dyn Regularizer {
        self.psi.as_ref()
    }

    pub fn phi(&self) -> &dyn Regularizer {
        self.phi.as_ref()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n(&self) -> usize {
        self.map.n()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `A*(b)` as an `n×n` matrix; equals `M` for full vectorization.
    pub fn target(&self) -> &DMatrix<f64> {
        &self.target
    }

    pub fn b_norm(&self) -> f64 {
        self.b.norm()
    }

    /// Full map with nonnegativity on both factors.
    pub fn is_snmf(&self) -> bool {
        self.map.is_full()
            && self.psi.as_builtin() == Some(&Builtin::NonnegIndicator)
            && self.phi.as_builtin() == Some(&Builtin::NonnegIndicator)
    }

    pub(crate) fn check_factors(&self, x: &DMatrix<f64>, y: &DMatrix<f64>, context: &'static str) -> Result<()> {
        let shape = (self.n(), self.rank);
        if x.shape() != shape {
            return Err(Error::shape(context, shape, x.shape()));
        }
        if y.shape() != shape {
            return Err(Error::shape(context, shape, y.shape()));
        }
        Ok(())
    }

    /// `A*(A(XYᵀ) − b)`, the data-fit gradient with respect to `XYᵀ`.
    pub(crate) fn residual_matrix(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.map {
            LinearMap::FullVectorization { .. } => x * y.transpose() - &self.target,
            LinearMap::SymmetricSampling(s) => {
                let mut out = DMatrix::zeros(self.n(), self.n());
                for &(i, j) in s.pairs() {
                    out[(i, j)] = x.row(i).dot(&y.row(j)) - self.target[(i, j)];
                }
                out
            }
        }
    }

    /// `½||A(XYᵀ) − b||²`.
    pub(crate) fn data_fit(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        match &self.map {
            LinearMap::FullVectorization { .. } => 0.5 * dist2(&(x * y.transpose()), &self.target),
            map => {
                let ax = map.apply_product(x, y);
                0.5 * ax.iter().zip(self.b.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()
            }
        }
    }
}

/// Relaxation parameters `(α, β, γ, ρ)` with `1/α + 1/β = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationParams {
    alpha: f64,
    beta: f64,
    gamma: f64,
    rho: f64,
}

impl RelaxationParams {
    /// `β = α/(α−1)`, `γ = max{0, −α, −(α+β)}`, `ρ = max{1, α²/(α+β)²}`.
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha == 0.0 || alpha == 1.0 {
            return Err(Error::InvalidParameter(format!("alpha must be finite and not in {{0, 1}}, got {alpha}")));
        }
        let beta = alpha / (alpha - 1.0);
        Self::with_parts(alpha, beta, None)
    }

    /// Explicit `β` (must satisfy `1/α + 1/β = 1`) and optional `γ`
    /// (defaults to the smallest admissible value).
    pub fn with_parts(alpha: f64, beta: f64, gamma: Option<f64>) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() || alpha == 0.0 || beta == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha and beta must be finite and nonzero, got alpha = {alpha}, beta = {beta}"
            )));
        }
        let sum = 1.0 / alpha + 1.0 / beta;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "1/alpha + 1/beta must equal 1, got {sum} (alpha = {alpha}, beta = {beta})"
            )));
        }
        let floor = gamma_min(alpha, beta);
        let gamma = gamma.unwrap_or(floor);
        if !(gamma >= floor) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma = {gamma} is below the admissible minimum {floor}"
            )));
        }
        let rho = rho(alpha, beta)?;
        Ok(RelaxationParams { alpha, beta, gamma, rho })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `s = β/(α+β)`, the weight on `A*(b)` in `Z*`.
    pub fn target_weight(&self) -> f64 {
        self.beta / (self.alpha + self.beta)
    }

    /// `α + 2γρ`, the curvature constant in the proximal-parameter caps.
    pub fn curvature(&self) -> f64 {
        self.alpha + 2.0 * self.gamma * self.rho
    }
}

/// `F_λ(X, Y)`.
pub fn f_lambda(spec: &ProblemSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<ExtReal> {
    spec.check_factors(x, y, "f_lambda")?;
    let regs = spec.psi().eval(x) + spec.phi().eval(y);
    if !regs.is_finite() {
        return Ok(ExtReal::PosInfinity);
    }
    Ok(regs + spec.data_fit(x, y) + 0.5 * spec.lambda() * dist2(x, y))
}

/// `Θ_{α,β,λ}(X, Y, Z)`.
pub fn theta(
    spec: &ProblemSpec,
    params: &RelaxationParams,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    z: &DMatrix<f64>,
) -> Result<ExtReal> {
    spec.check_factors(x, y, "theta")?;
    let n = spec.n();
    if z.shape() != (n, n) {
        return Err(Error::shape("theta (Z)", (n, n), z.shape()));
    }
    let regs = spec.psi().eval(x) + spec.phi().eval(y);
    if !regs.is_finite() {
        return Ok(ExtReal::PosInfinity);
    }
    let split = dist2(&(x * y.transpose()), z);
    let az = spec.map().apply(z)?;
    let fit: f64 = az.iter().zip(spec.b().iter()).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(regs
        + 0.5 * params.alpha() * split
        + 0.5 * params.beta() * fit
        + 0.5 * spec.lambda() * dist2(x, y))
}

/// The closed-form `Z` of the relaxation.
pub fn z_star(
    spec: &ProblemSpec,
    params: &RelaxationParams,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = spec.n();
    let mut z = DMatrix::zeros(n, n);
    z_star_into(spec, params, x, y, &mut z)?;
    Ok(z)
}

/// [`z_star`] written into a caller-owned `n×n` buffer.
pub fn z_star_into(
    spec: &ProblemSpec,
    params: &RelaxationParams,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    z: &mut DMatrix<f64>,
) -> Result<()> {
    spec.check_factors(x, y, "z_star")?;
    let n = spec.n();
    if z.shape() != (n, n) {
        return Err(Error::shape("z_star (workspace)", (n, n), z.shape()));
    }
    if params.alpha() + params.beta() == 0.0 {
        return Err(Error::InvalidParameter("alpha + beta = 0".into()));
    }
    let s = params.target_weight();
    z.gemm(1.0, x, &y.transpose(), 0.0);
    match spec.map() {
        LinearMap::FullVectorization { .. } => {
            // (1 − s)·XYᵀ + s·M
            *z *= 1.0 - s;
            *z += spec.target() * s;
        }
        LinearMap::SymmetricSampling(set) => {
            // Off Ω the entries stay XYᵀ; on Ω they move toward b.
            for &(i, j) in set.pairs() {
                z[(i, j)] += s * (spec.target()[(i, j)] - z[(i, j)]);
            }
        }
    }
    Ok(())
}

/// `√(2F_λ)/||b||`.
pub fn relobj(spec: &ProblemSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let f = f_lambda(spec, x, y)?.finite().ok_or(Error::Infeasible("relobj"))?;
    relobj_from_value(spec, f)
}

pub(crate) fn relobj_from_value(spec: &ProblemSpec, f: f64) -> Result<f64> {
    let denom = spec.b_norm();
    if denom == 0.0 {
        return Err(Error::InvalidParameter("relobj undefined: ||b|| = 0".into()));
    }
    if f < 0.0 {
        return Err(Error::InvalidParameter(format!("relobj undefined for negative objective {f}")));
    }
    Ok((2.0 * f).sqrt() / denom)
}

static NEXT_TRACKED_ID: AtomicU64 = AtomicU64::new(1);

/// A matrix paired with a mutation counter, so caches derived from it can
/// tell when they are stale.
#[derive(Debug, Clone)]
pub struct TrackedMatrix {
    id: u64,
    version: u64,
    data: DMatrix<f64>,
}

impl TrackedMatrix {
    pub fn new(data: DMatrix<f64>) -> Self {
        TrackedMatrix { id: NEXT_TRACKED_ID.fetch_add(1, Ordering::Relaxed), version: 0, data }
    }

    pub fn get(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Mutable access; bumps the version.
    pub fn get_mut(&mut self) -> &mut DMatrix<f64> {
        self.version += 1;
        &mut self.data
    }

    pub fn set(&mut self, data: DMatrix<f64>) {
        self.version += 1;
        self.data = data;
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    fn stamp(&self) -> (u64, u64) {
        (self.id, self.version)
    }
}

/// Gram products for a candidate `(U, V)` relative to the current iterate
/// `(X, Y)` in the symmetric NMF setting (`A` = full vectorization).
///
/// ```text
/// ||U − X||²   = tr(UᵀU) − 2 tr(XᵀU) + tr(XᵀX)
/// ||UVᵀ − M||² = tr((UᵀU)(VᵀV)) − 2⟨MᵀU, V⟩ + ||M||²
/// ```
#[derive(Debug, Clone)]
pub struct GramCache {
    pub utu: DMatrix<f64>,
    pub vtv: DMatrix<f64>,
    pub utv: DMatrix<f64>,
    pub xtu: DMatrix<f64>,
    pub ytv: DMatrix<f64>,
    pub xtx_trace: f64,
    pub yty_trace: f64,
    pub mtu: DMatrix<f64>,
    pub norm_m2: f64,
    u_stamp: (u64, u64),
    v_stamp: (u64, u64),
}

impl GramCache {
    pub fn build(
        spec: &ProblemSpec,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        u: &TrackedMatrix,
        v: &TrackedMatrix,
    ) -> Result<Self> {
        if !spec.map().is_full() {
            return Err(Error::Unsupported("Gram-cached objective requires the full vectorization map".into()));
        }
        spec.check_factors(x, y, "GramCache::build")?;
        spec.check_factors(u.get(), v.get(), "GramCache::build")?;
        let (uu, vv) = (u.get(), v.get());
        Ok(GramCache {
            utu: uu.tr_mul(uu),
            vtv: vv.tr_mul(vv),
            utv: uu.tr_mul(vv),
            xtu: x.tr_mul(uu),
            ytv: y.tr_mul(vv),
            xtx_trace: frob2(x),
            yty_trace: frob2(y),
            mtu: spec.target().tr_mul(uu),
            norm_m2: frob2(spec.target()),
            u_stamp: u.stamp(),
            v_stamp: v.stamp(),
        })
    }

    fn check_fresh(&self, u: &TrackedMatrix, v: &TrackedMatrix) -> Result<()> {
        for (built, cur) in [(self.u_stamp, u.stamp()), (self.v_stamp, v.stamp())] {
            if built != cur {
                return Err(Error::StaleCache { built: built.1, current: cur.1 });
            }
        }
        Ok(())
    }

    /// `(||U − X||², ||V − Y||²)` from cached traces.
    pub fn step_sizes(&self) -> (f64, f64) {
        let du = self.utu.trace() - 2.0 * self.xtu.trace() + self.xtx_trace;
        let dv = self.vtv.trace() - 2.0 * self.ytv.trace() + self.yty_trace;
        (du.max(0.0), dv.max(0.0))
    }
}

/// `F_λ(U, V)` for symmetric NMF without forming `UVᵀ`.
pub fn snmf_objective_cached(
    cache: &GramCache,
    spec: &ProblemSpec,
    u: &TrackedMatrix,
    v: &TrackedMatrix,
) -> Result<ExtReal> {
    cache.check_fresh(u, v)?;
    let regs = spec.psi().eval(u.get()) + spec.phi().eval(v.get());
    if !regs.is_finite() {
        return Ok(ExtReal::PosInfinity);
    }
    let cross: f64 = cache.utu.iter().zip(cache.vtv.iter()).map(|(a, b)| a * b).sum();
    let fit_inner: f64 = cache.mtu.iter().zip(v.get().iter()).map(|(a, b)| a * b).sum();
    let fit = (cross - 2.0 * fit_inner + cache.norm_m2).max(0.0);
    let sym = (cache.utu.trace() - 2.0 * cache.utv.trace() + cache.vtv.trace()).max(0.0);
    Ok(regs + 0.5 * fit + 0.5 * spec.lambda() * sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::SamplingSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random::<f64>())
    }

    fn normal_ish(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    /// Term-by-term evaluation with explicit loops.
    fn naive_f(spec: &ProblemSpec, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        let n = spec.n();
        let mut prod = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..spec.rank() {
                    acc += x[(i, k)] * y[(j, k)];
                }
                prod[(i, j)] = acc;
            }
        }
        let a = spec.map().apply(&prod).unwrap();
        let mut fit = 0.0;
        for k in 0..a.len() {
            fit += (a[k] - spec.b()[k]).powi(2);
        }
        let mut sym = 0.0;
        for (p, q) in x.iter().zip(y.iter()) {
            sym += (p - q).powi(2);
        }
        spec.psi().eval(x).to_f64() + spec.phi().eval(y).to_f64() + 0.5 * fit + 0.5 * spec.lambda() * sym
    }

    #[test]
    fn exact_factorization_has_zero_objective() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 0.0, 2.0, 1.5, 0.25]);
        let m = &x * x.transpose();
        let spec = ProblemSpec::snmf(&m, 2, 3.0).unwrap();
        assert!(f_lambda(&spec, &x, &x).unwrap().to_f64().abs() < 1e-28);
        assert_eq!(relobj(&spec, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn zero_factors_leave_half_data_norm() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0]);
        let spec = ProblemSpec::snmf(&m, 1, 0.0).unwrap();
        let z = DMatrix::zeros(2, 1);
        let f = f_lambda(&spec, &z, &z).unwrap().to_f64();
        assert!((f - 0.5 * 34.0).abs() < 1e-14);
        let spec = spec.with_lambda(7.0).unwrap();
        assert!((relobj(&spec, &z, &z).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn f_lambda_matches_naive_evaluator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 9;
        let m = uniform(&mut rng, n, n);
        let m = &m + m.transpose();
        let set = SamplingSet::random(n, 0.4, &mut rng).unwrap();
        let sampled = LinearMap::sampling(set);
        let b = sampled.apply(&m).unwrap();
        let specs = [
            ProblemSpec::snmf(&m, 3, 0.7).unwrap(),
            ProblemSpec::new(sampled, b, Arc::new(Builtin::L1 { weight: 0.3 }), Arc::new(Builtin::Zero), 1.3, 3).unwrap(),
        ];
        for spec in &specs {
            for _ in 0..5 {
                let x = uniform(&mut rng, n, 3);
                let y = uniform(&mut rng, n, 3);
                let f = f_lambda(spec, &x, &y).unwrap().to_f64();
                let naive = naive_f(spec, &x, &y);
                assert!((f - naive).abs() <= 1e-12 * naive.abs());
                let rel = relobj(spec, &x, &y).unwrap();
                assert!((rel - (2.0 * naive).sqrt() / spec.b().norm()).abs() <= 1e-12 * rel);
            }
        }
    }

    #[test]
    fn infeasible_factors_give_infinity() {
        let m = DMatrix::identity(2, 2);
        let spec = ProblemSpec::snmf(&m, 1, 1.0).unwrap();
        let x = DMatrix::from_row_slice(2, 1, &[-1.0, 0.0]);
        let y = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(f_lambda(&spec, &x, &y).unwrap(), ExtReal::PosInfinity);
        assert!(matches!(relobj(&spec, &x, &y), Err(Error::Infeasible(_))));
    }

    #[test]
    fn f_lambda_shape_errors() {
        let spec = ProblemSpec::snmf(&DMatrix::identity(3, 3), 2, 1.0).unwrap();
        let bad = DMatrix::zeros(3, 1);
        let ok = DMatrix::zeros(3, 2);
        assert!(matches!(f_lambda(&spec, &bad, &ok), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(f_lambda(&spec, &ok, &bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn f_lambda_invariant_under_column_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = uniform(&mut rng, 6, 6);
        let spec = ProblemSpec::snmf(&(&m + m.transpose()), 3, 0.4).unwrap();
        let x = uniform(&mut rng, 6, 3);
        let y = uniform(&mut rng, 6, 3);
        let perm = [2usize, 0, 1];
        let xp = DMatrix::from_fn(6, 3, |i, k| x[(i, perm[k])]);
        let yp = DMatrix::from_fn(6, 3, |i, k| y[(i, perm[k])]);
        let a = f_lambda(&spec, &x, &y).unwrap().to_f64();
        let b = f_lambda(&spec, &xp, &yp).unwrap().to_f64();
        assert!((a - b).abs() <= 1e-13 * a);
    }

    #[test]
    fn relaxation_params_construction() {
        let p = RelaxationParams::new(0.6).unwrap();
        assert!((p.beta() + 1.5).abs() < 1e-12);
        assert!((p.gamma() - 0.9).abs() < 1e-12);
        assert_eq!(p.rho(), 1.0);
        let p = RelaxationParams::new(0.2).unwrap();
        assert!((p.rho() - 16.0).abs() < 1e-9);
        assert!((p.gamma() - 0.05).abs() < 1e-12);
        assert!(RelaxationParams::new(1.0).is_err());
        assert!(RelaxationParams::new(0.0).is_err());
        assert!(RelaxationParams::with_parts(2.0, 3.0, None).is_err());
        assert!(RelaxationParams::with_parts(2.0, 2.0, Some(-0.1)).is_err());
        assert!(RelaxationParams::with_parts(0.6, -1.5, Some(0.5)).is_err());
        assert!(RelaxationParams::with_parts(2.0, 2.0, Some(1.0)).is_ok());
    }

    #[test]
    fn theta_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = normal_ish(&mut rng, 4, 2);
        let y = normal_ish(&mut rng, 4, 2);
        let zero_b = DVector::zeros(16);
        let spec = ProblemSpec::new(
            LinearMap::full(4),
            zero_b,
            Arc::new(Builtin::Zero),
            Arc::new(Builtin::Zero),
            0.0,
            2,
        )
        .unwrap();
        let params = RelaxationParams::new(2.0).unwrap();
        let t = theta(&spec, &params, &x, &y, &DMatrix::zeros(4, 4)).unwrap().to_f64();
        let expect = frob2(&(&x * y.transpose()));
        assert!((t - expect).abs() <= 1e-13 * expect);

        // Z = XYᵀ and b = A(XYᵀ): only the penalty survives.
        let xy = &x * y.transpose();
        let map = LinearMap::full(4);
        let spec = ProblemSpec::new(map.clone(), map.apply(&xy).unwrap(), Arc::new(Builtin::Zero), Arc::new(Builtin::Zero), 2.5, 2)
            .unwrap();
        let t = theta(&spec, &params, &x, &y, &xy).unwrap().to_f64();
        assert!((t - 1.25 * dist2(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn z_star_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = uniform(&mut rng, 5, 2);
        let y = uniform(&mut rng, 5, 2);
        let m = uniform(&mut rng, 5, 5);
        let spec = ProblemSpec::factorization(&m, 2, 0.0, Builtin::Zero, Builtin::Zero).unwrap();
        let xy = &x * y.transpose();

        let p = RelaxationParams::with_parts(2.0, 2.0, None).unwrap();
        let z = z_star(&spec, &p, &x, &y).unwrap();
        assert!((z - (&xy * 0.5 + &m * 0.5)).amax() < 1e-14);

        let p = RelaxationParams::new(0.6).unwrap();
        let z = z_star(&spec, &p, &x, &y).unwrap();
        assert!((z - (&xy * (-2.0 / 3.0) + &m * (5.0 / 3.0))).amax() < 1e-13);

        // b = vec(XYᵀ) is a fixed point.
        let spec = ProblemSpec::factorization(&xy, 2, 0.0, Builtin::Zero, Builtin::Zero).unwrap();
        for alpha in [0.2, 0.6, 2.0, -1.0] {
            let p = RelaxationParams::new(alpha).unwrap();
            let z = z_star(&spec, &p, &x, &y).unwrap();
            assert!((z - &xy).amax() < 1e-12);
        }
    }

    #[test]
    fn z_star_satisfies_stationarity_on_sampling_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 7;
        let map = LinearMap::sampling(SamplingSet::random(n, 0.5, &mut rng).unwrap());
        let b = DVector::from_fn(map.q(), |_, _| rng.random::<f64>());
        let spec = ProblemSpec::new(map.clone(), b.clone(), Arc::new(Builtin::Zero), Arc::new(Builtin::Zero), 0.3, 2).unwrap();
        for alpha in [0.2, 0.6, 0.8, 2.0] {
            let p = RelaxationParams::new(alpha).unwrap();
            let x = normal_ish(&mut rng, n, 2);
            let y = normal_ish(&mut rng, n, 2);
            let z = z_star(&spec, &p, &x, &y).unwrap();
            let resid = map.apply(&z).unwrap() - &b;
            let grad = (&z - &x * y.transpose()) * alpha + map.adjoint(&resid).unwrap() * p.beta();
            assert!(grad.norm() <= 1e-10 * (1.0 + z.norm()));
        }
    }

    #[test]
    fn gram_cached_objective_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let (n, r) = (30, 4);
        let n_mat = uniform(&mut rng, n, n);
        let m = n_mat.tr_mul(&n_mat);
        let spec = ProblemSpec::snmf(&m, r, 0.9).unwrap();
        let x = uniform(&mut rng, n, r);
        let y = uniform(&mut rng, n, r);
        let u = TrackedMatrix::new(uniform(&mut rng, n, r));
        let v = TrackedMatrix::new(uniform(&mut rng, n, r));
        let cache = GramCache::build(&spec, &x, &y, &u, &v).unwrap();
        let cached = snmf_objective_cached(&cache, &spec, &u, &v).unwrap().to_f64();
        let direct = f_lambda(&spec, u.get(), v.get()).unwrap().to_f64();
        assert!((cached - direct).abs() <= 1e-10 * direct);
        let (du, dv) = cache.step_sizes();
        assert!((du - dist2(u.get(), &x)).abs() <= 1e-10 * du);
        assert!((dv - dist2(v.get(), &y)).abs() <= 1e-10 * dv);
    }

    #[test]
    fn gram_cached_objective_rank_one_and_exact() {
        let u0 = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 0.5]);
        let v0 = DMatrix::from_column_slice(3, 1, &[0.3, 0.0, 1.0]);
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 0.5]);
        let spec = ProblemSpec::snmf(&m, 1, 0.0).unwrap();
        let (u, v) = (TrackedMatrix::new(u0.clone()), TrackedMatrix::new(v0.clone()));
        let cache = GramCache::build(&spec, &u0, &v0, &u, &v).unwrap();
        let cached = snmf_objective_cached(&cache, &spec, &u, &v).unwrap().to_f64();
        // (uᵀu)(vᵀv) − 2 uᵀMv + ||M||² by hand
        let by_hand = (u0.norm_squared() * v0.norm_squared()
            - 2.0 * (u0.transpose() * &m * &v0)[(0, 0)]
            + m.norm_squared())
            * 0.5;
        assert!((cached - by_hand).abs() < 1e-13);
        assert!((by_hand - 0.5 * dist2(&(&u0 * v0.transpose()), &m)).abs() < 1e-13);

        let spec = ProblemSpec::snmf(&(&u0 * u0.transpose()), 1, 1.0).unwrap();
        let u = TrackedMatrix::new(u0.clone());
        let cache = GramCache::build(&spec, &u0, &u0, &u, &u).unwrap();
        assert!(snmf_objective_cached(&cache, &spec, &u, &u).unwrap().to_f64().abs() < 1e-13);
    }

    #[test]
    fn stale_cache_is_detected() {
        let m = DMatrix::identity(3, 3);
        let spec = ProblemSpec::snmf(&m, 1, 0.0).unwrap();
        let x = DMatrix::from_element(3, 1, 1.0);
        let mut u = TrackedMatrix::new(x.clone());
        let v = TrackedMatrix::new(x.clone());
        let cache = GramCache::build(&spec, &x, &x, &u, &v).unwrap();
        assert!(snmf_objective_cached(&cache, &spec, &u, &v).is_ok());
        u.get_mut()[(0, 0)] = 2.0;
        assert!(matches!(
            snmf_objective_cached(&cache, &spec, &u, &v),
            Err(Error::StaleCache { .. })
        ));
        // a different matrix with the same version is also rejected
        let other = TrackedMatrix::new(x.clone());
        assert!(snmf_objective_cached(&cache, &spec, &other, &v).is_err());
    }

    #[test]
    fn spec_validation() {
        let m = DMatrix::identity(3, 3);
        assert!(ProblemSpec::snmf(&m, 4, 1.0).is_err());
        assert!(ProblemSpec::snmf(&m, 0, 1.0).is_err());
        assert!(ProblemSpec::snmf(&m, 2, -1.0).is_err());
        let map = LinearMap::full(3);
        assert!(ProblemSpec::new(map, DVector::zeros(8), Arc::new(Builtin::Zero), Arc::new(Builtin::Zero), 0.0, 1).is_err());
        assert!(ProblemSpec::factorization(&m, 1, 0.0, Builtin::L1 { weight: -1.0 }, Builtin::Zero).is_err());
    }
}
