//! Small dense helpers shared across modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Squared Frobenius norm.
pub fn frob2(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// `||a - b||_F^2` without allocating the difference.
pub fn dist2(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Largest eigenvalue of `FᵀF`, i.e. `||F||_2^2`, from the `r x r` Gram matrix.
///
/// The Gram matrix is tiny (`r x r`), so a full symmetric eigensolve is used
/// instead of an iterative estimate; iterative estimates approach the top
/// eigenvalue from below, which would shrink the line-search caps.
pub fn spectral_norm_sq(factor: &DMatrix<f64>) -> f64 {
    if factor.ncols() == 0 || factor.nrows() == 0 {
        return 0.0;
    }
    let gram = factor.tr_mul(factor);
    max_eigenvalue_symmetric(&gram).max(0.0)
}

pub fn max_eigenvalue_symmetric(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_eigenvalue_symmetric(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Largest absolute asymmetry `max |m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Result of a power iteration run.
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Spectral norm `||B||_2` of a square matrix by power iteration on `BᵀB`.
///
/// Stops when the relative change of the Rayleigh quotient falls below `tol`
/// or after `max_iter` sweeps.
pub fn spectral_norm_power(b: &DMatrix<f64>, tol: f64, max_iter: usize) -> PowerIteration {
    let n = b.ncols();
    if n == 0 || b.nrows() == 0 {
        return PowerIteration { value: 0.0, iterations: 0, converged: true };
    }
    // Deterministic start with a slight tilt so it is not orthogonal to
    // structured top singular vectors such as the all-ones vector's complement.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0) / (n as f64 * 7.0));
    v /= v.norm();
    let mut estimate = 0.0;
    for it in 1..=max_iter {
        let bv = b * &v;
        let w = b.tr_mul(&bv);
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return PowerIteration { value: 0.0, iterations: it, converged: true };
        }
        v = w / norm;
        if it > 1 && (next - estimate).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return PowerIteration { value: next.max(0.0).sqrt(), iterations: it, converged: true };
        }
        estimate = next;
    }
    PowerIteration { value: estimate.max(0.0).sqrt(), iterations: max_iter, converged: false }
}
