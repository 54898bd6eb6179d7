//! Synthetic and file-backed target matrices.
//!
//! Targets follow `M = NᵀN / max(NᵀN) + t·|E|` with `E` standard normal.
//!
//! Random streams are reproducible across languages: a ChaCha8 generator
//! seeded with `seed` (the `rand_chacha` `seed_from_u64` convention) yields
//! uniforms in `[0, 1)` as `(next_u64 >> 11)·2⁻⁵³`. `N` (`m×n`) is filled
//! column-major first. Each normal then consumes two further uniforms
//! `u₁, u₂` through Box–Muller, `√(−2 ln(1 − u₁))·cos(2πu₂)`, and `E` is
//! filled column-major.

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where `N` (or the planted factor) comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// `N` is `m×n` uniform(0,1).
    Synthetic { n: usize, m: usize },
    /// `N` read from a Matrix Market or CSV file; `M` is `ncols(N)` square.
    File { path: PathBuf },
    /// `M = X̄X̄ᵀ` with `X̄` `n×r` uniform(0,1).
    Planted { n: usize, r: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecipe {
    #[serde(flatten)]
    pub source: DataSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_t: f64,
    /// Divide by the largest entry before adding noise.
    #[serde(default = "default_true")]
    pub normalize: bool,
    /// Use `(|E| + |E|ᵀ)/2` so the target stays symmetric.
    #[serde(default)]
    pub symmetrize_noise: bool,
}

fn default_true() -> bool {
    true
}

impl DatasetRecipe {
    pub fn synthetic(n: usize, m: usize, seed: u64, noise_t: f64) -> Self {
        DatasetRecipe {
            source: DataSource::Synthetic { n, m },
            seed,
            noise_t,
            normalize: true,
            symmetrize_noise: false,
        }
    }

    pub fn planted(n: usize, r: usize, seed: u64) -> Self {
        DatasetRecipe {
            source: DataSource::Planted { n, r },
            seed,
            noise_t: 0.0,
            normalize: false,
            symmetrize_noise: false,
        }
    }
}

/// One standard normal from two uniforms (Box–Muller, cosine branch).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn uniform_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let v: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
    DMatrix::from_column_slice(rows, cols, &v)
}

/// The planted factor `X̄` used by [`DataSource::Planted`].
pub fn planted_factor(n: usize, r: usize, seed: u64) -> DMatrix<f64> {
    uniform_matrix(&mut ChaCha8Rng::seed_from_u64(seed), n, r)
}

/// Builds the `n×n` target described by `recipe`.
pub fn gen_data(recipe: &DatasetRecipe) -> Result<DMatrix<f64>> {
    if !(recipe.noise_t >= 0.0) || !recipe.noise_t.is_finite() {
        return Err(Error::InvalidParameter(format!("noise_t must be finite and >= 0, got {}", recipe.noise_t)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let mut m = match &recipe.source {
        DataSource::Synthetic { n, m } => {
            if *n == 0 || *m == 0 {
                return Err(Error::InvalidParameter(format!("dataset needs n, m >= 1, got n = {n}, m = {m}")));
            }
            let factor = uniform_matrix(&mut rng, *m, *n);
            factor.tr_mul(&factor)
        }
        DataSource::File { path } => {
            let factor = crate::io::read_matrix(path)?;
            if factor.iter().any(|&v| v < 0.0) {
                log::warn!("{} has negative entries; proceeding", path.display());
            }
            factor.tr_mul(&factor)
        }
        DataSource::Planted { n, r } => {
            if *r == 0 || r > n {
                return Err(Error::InvalidParameter(format!("planted rank must satisfy 1 <= r <= n, got r = {r}, n = {n}")));
            }
            let xbar = uniform_matrix(&mut rng, *n, *r);
            &xbar * xbar.transpose()
        }
    };
    if recipe.normalize {
        let top = m.max();
        if !(top > 0.0) {
            return Err(Error::InvalidParameter(format!("cannot normalize: largest entry is {top}")));
        }
        m /= top;
    }
    if recipe.noise_t > 0.0 {
        let n = m.nrows();
        let draws: Vec<f64> = (0..n * n).map(|_| standard_normal(&mut rng).abs()).collect();
        let mut noise = DMatrix::from_column_slice(n, n, &draws);
        if recipe.symmetrize_noise {
            noise = (&noise + noise.transpose()) * 0.5;
        }
        m += noise * recipe.noise_t;
    }
    Ok(m)
}
