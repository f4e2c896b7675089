mod common;

use common::{any_expr, sample_point, seeded, smooth_expr};
use lamsym::expr::{evaluate, residual_at};
use lamsym::{differentiate, parse, simplify};
use proptest::prelude::*;

const VARS: &[&str] = &["q1", "q2", "p1", "p2", "t"];

/// Five-point central difference.
fn fd(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

proptest! {
    #![proptest_config(seeded(1000, 11))]

    #[test]
    fn printed_trees_parse_back_to_the_same_tree(e in any_expr(VARS)) {
        let text = e.to_string();
        let back = parse(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(back, e);
    }
}

proptest! {
    #![proptest_config(seeded(200, 12))]

    #[test]
    fn derivatives_match_finite_differences(
        e in smooth_expr(VARS),
        var in proptest::sample::select(VARS),
        at in sample_point(VARS, -1.0, 1.0),
    ) {
        let d = differentiate(&e, var);
        let exact = evaluate(&d, &at).unwrap();
        let f = |x: f64| {
            let mut pt = at.clone();
            pt.insert(var.to_string(), x);
            evaluate(&e, &pt).unwrap()
        };
        let approx = fd(f, at[var], 1e-3);
        let rel = (exact - approx).abs() / exact.abs().max(1.0);
        prop_assert!(rel < 1e-5, "d/d{var} {e} = {d}: exact {exact}, fd {approx}");
    }

    #[test]
    fn simplification_preserves_values_and_is_idempotent(
        e in smooth_expr(VARS),
        at in sample_point(VARS, -1.0, 1.0),
    ) {
        let s = simplify(&e);
        prop_assert_eq!(simplify(&s), s.clone());
        let diff = e.clone() - s.clone();
        let r = residual_at(&diff, &at).unwrap();
        prop_assert!(r < 1e-9, "{e} vs {s}: scaled residual {r}");
    }
}

#[test]
fn derivative_of_a_sum_is_the_sum_of_derivatives() {
    let e = parse("q1^3*exp(p1) + sin(q1*p1)").unwrap();
    let lhs = differentiate(&e, "q1");
    let rhs = differentiate(&parse("q1^3*exp(p1)").unwrap(), "q1") + differentiate(&parse("sin(q1*p1)").unwrap(), "q1");
    assert_eq!(simplify(&(lhs - rhs)), lamsym::Expr::zero());
}
