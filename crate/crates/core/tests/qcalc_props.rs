use proptest::prelude::*;
use qlm_core::qcalc::{q_derivative_guarded, DEFAULT_EPSILON_Q};
use qlm_core::{
    q_bracket, q_derivative, q_factorial, q_gradient, q_jacobian, q_partial, q_taylor_eval,
    DenseMatrix, FallbackStep, FnResidualMap, FnScalarField, QVector,
};

const RELATIVE: FallbackStep = FallbackStep::Relative;

type RealFn = fn(f64) -> f64;

fn away_from_zero(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi, any::<bool>()).prop_map(|(v, neg)| if neg { -v } else { v })
}

fn poly_eval(poly: &[f64], x: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

/// Σ|a_k|·|x|^k, the magnitude that rounding errors scale with.
fn poly_scale(poly: &[f64], x: f64) -> f64 {
    poly.iter()
        .rev()
        .fold(0.0, |acc, a| acc * x.abs() + a.abs())
}

proptest! {
    #[test]
    fn monomial_law(n in 1i32..=8, q in 0.05f64..0.95, x in away_from_zero(0.05, 3.0)) {
        let d = q_derivative(|t: f64| t.powi(n), x, q, RELATIVE).unwrap();
        let bracket: f64 = (0..n).map(|k| q.powi(k)).sum();
        let expected = bracket * x.powi(n - 1);
        prop_assert!((d - expected).abs() <= 1e-12 * expected.abs(), "{d} vs {expected}");
    }

    #[test]
    fn linearity(
        f in prop::collection::vec(-3.0f64..3.0, 1..6),
        g in prop::collection::vec(-3.0f64..3.0, 1..6),
        alpha in -5.0f64..5.0,
        beta in -5.0f64..5.0,
        q in 0.1f64..0.9,
        x in away_from_zero(0.1, 2.0),
    ) {
        let combined = q_derivative(|t| alpha * poly_eval(&f, t) + beta * poly_eval(&g, t), x, q, RELATIVE).unwrap();
        let df = q_derivative(|t| poly_eval(&f, t), x, q, RELATIVE).unwrap();
        let dg = q_derivative(|t| poly_eval(&g, t), x, q, RELATIVE).unwrap();
        // The difference quotient amplifies rounding in f by 1/((1 − q)|x|).
        let scale = (alpha.abs() * poly_scale(&f, x) + beta.abs() * poly_scale(&g, x)) / ((1.0 - q) * x.abs());
        prop_assert!((combined - (alpha * df + beta * dg)).abs() <= 1e-12 * (1.0 + scale));
    }

    #[test]
    fn classical_limit(x in away_from_zero(0.1, 3.0), which in 0usize..3) {
        let (f, df): (RealFn, RealFn) = match which {
            0 => (f64::exp, f64::exp),
            1 => (|t| t.powi(3) + t, |t| 3.0 * t * t + 1.0),
            _ => (f64::sinh, f64::cosh),
        };
        let d = q_derivative(f, x, 1.0 - 1e-7, RELATIVE).unwrap();
        prop_assert!((d - df(x)).abs() <= 1e-4 * df(x).abs());
    }

    #[test]
    fn affine_exactness(
        (n, m) in (1usize..=4).prop_flat_map(|n| (Just(n), n..=6)),
        seed in prop::collection::vec(-1.0f64..1.0, 64),
        q in 0.1f64..0.9,
    ) {
        let a = DenseMatrix::from_fn(m, n, |i, j| seed[i * n + j]).unwrap();
        let b: Vec<f64> = seed[40..40 + m].to_vec();
        // Coordinates in 0.5 ≤ |x| ≤ 2 keep (1 − q)·x well above the guard.
        let x: Vec<f64> = (0..n)
            .map(|j| (0.5 + 1.5 * seed[50 + j].abs()).copysign(seed[56 + j]))
            .collect();
        let (a2, b2) = (a.clone(), b.clone());
        let map = FnResidualMap::new(n, m, move |x| {
            a2.mul_vec(x).unwrap().iter().zip(&b2).map(|(ax, bi)| ax - bi).collect()
        })
        .unwrap();
        let j = q_jacobian(&map, &x, &QVector::uniform(n, q).unwrap(), RELATIVE).unwrap();
        let err: f64 = j.as_slice().iter().zip(a.as_slice()).map(|(p, r)| (p - r).powi(2)).sum::<f64>().sqrt();
        prop_assume!(a.frobenius_norm() > 0.1);
        prop_assert!(err <= 1e-14 * a.frobenius_norm(), "error {err:e}");
    }

    #[test]
    fn q_taylor_exactness(
        poly in prop::collection::vec(-3.0f64..3.0, 1..=7),
        c in -2.0f64..2.0,
        x in -2.0f64..2.0,
        q in prop::sample::select(vec![0.3, 0.6, 0.9]),
    ) {
        let direct = poly_eval(&poly, x);
        let taylor = q_taylor_eval(&poly, c, x, q).unwrap();
        // Relative to the term magnitudes, so that cancellation in the
        // polynomial itself does not count against the expansion.
        let scale = poly_scale(&poly, x.abs().max(c.abs()) + 1.0);
        prop_assert!((taylor - direct).abs() <= 1e-10 * scale, "{taylor} vs {direct}");
    }

    #[test]
    fn fallback_continuity(q in 0.1f64..0.99, sign in prop::sample::select(vec![-1.0, 1.0]), which in 0usize..3) {
        let f: fn(f64) -> f64 = match which {
            0 => f64::exp,
            1 => |t| t.sin() + 2.0,
            _ => |t| 1.0 / (1.0 + t * t) + t,
        };
        let threshold = DEFAULT_EPSILON_Q / (1.0 - q);
        let above = q_derivative_guarded(f, sign * threshold * 1.01, q, DEFAULT_EPSILON_Q, RELATIVE).unwrap();
        let below = q_derivative_guarded(f, sign * threshold * 0.99, q, DEFAULT_EPSILON_Q, RELATIVE).unwrap();
        prop_assert!((above - below).abs() <= 1e-3 * below.abs(), "{above} vs {below}");
    }

    #[test]
    fn gradient_is_the_stack_of_partials(
        x in prop::collection::vec(-2.0f64..2.0, 3),
        q in prop::collection::vec(0.1f64..0.95, 3),
    ) {
        let field = FnScalarField::new(3, |x: &[f64]| x[0] * x[1].exp() + x[2].powi(3) - x[0] * x[2]);
        let qv = QVector::new(q).unwrap();
        let g = q_gradient(&field, &x, &qv, RELATIVE).unwrap();
        for (i, gi) in g.iter().enumerate() {
            prop_assert_eq!(*gi, q_partial(&field, &x, i, &qv, RELATIVE).unwrap());
        }
    }

    #[test]
    fn jacobian_columns_are_scalar_q_derivatives(
        x in prop::collection::vec(away_from_zero(0.1, 2.0), 2),
        q in prop::collection::vec(0.1f64..0.95, 2),
    ) {
        let r = |x: &[f64]| vec![x[0] * x[0] - x[1], x[0] * x[1].sin(), (x[0] + x[1]).exp()];
        let map = FnResidualMap::new(2, 3, r).unwrap();
        let j = q_jacobian(&map, &x, &QVector::new(q.clone()).unwrap(), RELATIVE).unwrap();
        for row in 0..3 {
            for col in 0..2 {
                let d = q_derivative(
                    |t| {
                        let mut y = x.clone();
                        y[col] = t;
                        r(&y)[row]
                    },
                    x[col],
                    q[col],
                    RELATIVE,
                )
                .unwrap();
                prop_assert_eq!(j[(row, col)], d);
            }
        }
    }

    #[test]
    fn bracket_and_factorial(n in 0u32..=12, q in 0.01f64..0.99) {
        let bracket: f64 = (0..n).map(|k| q.powi(k as i32)).sum();
        let b = q_bracket(n, q);
        prop_assert!((b - bracket).abs() <= 1e-14 * bracket.max(1.0));
        let product: f64 = (1..=n).map(|k| q_bracket(k, q)).product();
        prop_assert!((q_factorial(n, q) - product).abs() <= 1e-13 * product);
        prop_assert!(b <= n as f64);
    }
}

#[test]
fn bracket_tends_to_n_as_q_tends_to_one() {
    for n in 1..=10 {
        let b = q_bracket(n, 1.0 - 1e-9);
        assert!((b - n as f64).abs() < 1e-6 * n as f64);
    }
    let f = q_factorial(5, 1.0 - 1e-9);
    assert!((f - 120.0).abs() < 1e-5);
}
