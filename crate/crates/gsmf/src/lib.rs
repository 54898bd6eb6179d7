//! Symmetric matrix factorization through a relaxed, penalized splitting.
//!
//! The crate solves
//!
//! ```text
//! min_{X,Y}  Ψ(X) + Φ(Y) + ½||A(XYᵀ) − b||² + λ/2·||X − Y||²
//! ```
//!
//! over `n×r` factors, where `A` either vectorizes an `n×n` matrix or samples
//! a symmetric set of its entries. The solver alternates proximal updates on
//! `X` and `Y` against the closed-form minimizer of a relaxed potential in an
//! auxiliary variable `Z`, with a nonmonotone line search on the proximal
//! parameters.
//!
//! ```
//! use gsmf::{ProblemSpec, RelaxationParams, SolverConfig, Scheme, solve};
//! use nalgebra::DMatrix;
//!
//! let x_true = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.5, 1.0, 0.0, 2.0, 1.0, 1.0]);
//! let m = &x_true * x_true.transpose();
//! let spec = ProblemSpec::snmf(&m, 2, 1.0).unwrap();
//! let params = RelaxationParams::new(0.6).unwrap();
//! let config = SolverConfig { scheme: Scheme::Hierarchical, tol: 1e-10, ..SolverConfig::default() };
//! let result = solve(&spec, &params, &config, None).unwrap();
//! assert!(result.final_relobj() < 1e-3);
//! ```

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod extended;
pub mod io;
pub mod linalg;
pub mod objective;
pub mod operators;
pub mod regularizers;
pub mod solver;

pub use error::{Error, Result};
pub use extended::ExtReal;
pub use objective::{f_lambda, relobj, theta, z_star, ProblemSpec, RelaxationParams};
pub use operators::{LinearMap, SamplingSet};
pub use regularizers::{Builtin, Regularizer};
pub use solver::{solve, IterationRecord, LineSearch, Scheme, SolveResult, SolverConfig, Status};
