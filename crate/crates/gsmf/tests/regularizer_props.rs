use gsmf::{Builtin, Regularizer};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn builtin() -> impl Strategy<Value = Builtin> {
    prop_oneof![
        Just(Builtin::Zero),
        Just(Builtin::NonnegIndicator),
        (0.0..3.0f64).prop_map(|weight| Builtin::L1 { weight }),
        (0.0..3.0f64).prop_map(|weight| Builtin::NonnegPlusL1 { weight }),
    ]
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-5.0..5.0f64, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

/// Scalar prox objective `h(x) + (x − w)²/(2t)` for a 1×1 argument.
fn scalar_objective(h: &Builtin, x: f64, w: f64, t: f64) -> f64 {
    h.eval(&DMatrix::from_element(1, 1, x)).to_f64() + (x - w).powi(2) / (2.0 * t)
}

proptest! {
    #[test]
    fn prox_beats_a_fine_grid(h in builtin(), w in -5.0..5.0f64, t in 0.05..4.0f64) {
        let p = h.prox(&DMatrix::from_element(1, 1, w), t).unwrap()[(0, 0)];
        let best = scalar_objective(&h, p, w, t);
        prop_assert!(best.is_finite());
        for k in 0..=4000 {
            let x = -10.0 + 20.0 * k as f64 / 4000.0;
            prop_assert!(best <= scalar_objective(&h, x, w, t) + 1e-12);
        }
    }

    #[test]
    fn prox_is_nonexpansive(h in builtin(), a in matrix(4, 3), b in matrix(4, 3), t in 0.05..4.0f64) {
        let pa = h.prox(&a, t).unwrap();
        let pb = h.prox(&b, t).unwrap();
        prop_assert!((pa - pb).norm() <= (a - b).norm() * (1.0 + 1e-12));
    }

    #[test]
    fn prox_lands_in_the_domain(h in builtin(), w in matrix(5, 2), t in 0.05..4.0f64) {
        prop_assert!(h.eval(&h.prox(&w, t).unwrap()).is_finite());
    }

    #[test]
    fn column_prox_matches_full_prox(h in builtin(), w in matrix(5, 3), t in 0.05..4.0f64) {
        prop_assert!(h.column_separable());
        let full = h.prox(&w, t).unwrap();
        for j in 0..3 {
            let col = h.prox_column(j, &DVector::from(w.column(j)), t).unwrap();
            prop_assert_eq!(col, DVector::from(full.column(j)));
        }
    }

    #[test]
    fn builtins_are_convex(h in builtin(), a in matrix(3, 2), b in matrix(3, 2), s in 0.0..1.0f64) {
        prop_assert_eq!(h.kappa(), 0.0);
        let (fa, fb) = (h.eval(&a).to_f64(), h.eval(&b).to_f64());
        prop_assume!(fa.is_finite() && fb.is_finite());
        let mid = h.eval(&(&a * s + &b * (1.0 - s))).to_f64();
        prop_assert!(mid <= s * fa + (1.0 - s) * fb + 1e-12 * (1.0 + fa.abs() + fb.abs()));
    }
}
