use proptest::prelude::*;
use symred::expr::{parse, Expr, Func};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-3i32..=3).prop_map(|c| Expr::constant(c as f64 / 2.0)),
        Just(Expr::var("x")),
        Just(Expr::var("y")),
    ]
}

/// Expressions defined on all of R²: division only by `1 + u²`.
fn smooth() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a / (Expr::one() + b.powi(2))),
            (inner.clone(), 0u32..=3).prop_map(|(a, n)| a.powi(n)),
            inner.clone().prop_map(|a| -a),
            inner.clone().prop_map(|a| a.apply(Func::Sin)),
            inner.clone().prop_map(|a| a.apply(Func::Cos)),
            // keep exp arguments tame
            inner.prop_map(|a| (&a / &(Expr::constant(4.0) + a.powi(2))).apply(Func::Exp)),
        ]
    })
}

fn at(e: &Expr, x: f64, y: f64) -> f64 {
    e.eval(&[("x", x), ("y", y)]).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn print_parse_round_trip(e in smooth(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(back.to_string(), text.clone());
        prop_assert!(close(at(&e, x, y), at(&back, x, y), 1e-12), "{}", text);
    }

    #[test]
    fn simplify_preserves_value(e in smooth(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let s = e.simplified();
        prop_assert!(close(at(&e, x, y), at(&s, x, y), 1e-12));
        prop_assert!(s.size() <= e.size());
    }

    #[test]
    fn derivative_matches_central_difference(e in smooth(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let h = 1e-6;
        let fd = (at(&e, x + h, y) - at(&e, x - h, y)) / (2.0 * h);
        let d = at(&e.derivative("x"), x, y);
        prop_assert!(close(d, fd, 1e-5), "{}: {} vs {}", e, d, fd);
    }

    #[test]
    fn derivative_is_linear(a in smooth(), b in smooth(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let lhs = at(&(a.clone() + b.clone()).derivative("y"), x, y);
        let rhs = at(&a.derivative("y"), x, y) + at(&b.derivative("y"), x, y);
        prop_assert!(close(lhs, rhs, 1e-10));
    }

    #[test]
    fn mixed_partials_commute(e in smooth(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let xy = at(&e.derivative("x").derivative("y"), x, y);
        let yx = at(&e.derivative("y").derivative("x"), x, y);
        prop_assert!(close(xy, yx, 1e-9));
    }

    #[test]
    fn independent_variable_has_zero_derivative(e in smooth()) {
        prop_assert!(e.derivative("w").simplified().is_zero());
    }
}

#[test]
fn evaluation_errors_survive_simplification() {
    for src in ["1/(x - x)", "log(x - x)", "sqrt(x - 2 - x)"] {
        let e = parse(src).unwrap().simplified();
        assert!(e.eval(&[("x", 0.5)]).is_err(), "{src}");
    }
}
