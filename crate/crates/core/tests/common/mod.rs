//! Generators and small helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use lamsym::expr::{bindings, Func};
use lamsym::{parse, Expr};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

/// Proptest configuration with a fixed seed: every run draws the same cases.
pub fn seeded(cases: u32, seed: u64) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(seed), failure_persistence: None, ..Config::default() }
}

pub fn p(s: &str) -> Expr {
    parse(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn bind(pairs: &[(&str, &str)]) -> BTreeMap<String, Expr> {
    bindings(pairs.iter().map(|(k, v)| (*k, p(v))))
}

pub fn point(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn rational() -> impl Strategy<Value = Expr> {
    (-9i64..=9, 1i64..=4).prop_map(|(n, d)| Expr::ratio(n, d))
}

fn leaf(vars: &'static [&'static str]) -> impl Strategy<Value = Expr> {
    prop_oneof![rational(), proptest::sample::select(vars).prop_map(Expr::var)]
}

/// Arbitrary trees over every node kind; values may be undefined.
pub fn any_expr(vars: &'static [&'static str]) -> impl Strategy<Value = Expr> {
    leaf(vars).prop_recursive(5, 40, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 2..4).prop_map(Expr::sum),
            proptest::collection::vec(inner.clone(), 2..4).prop_map(Expr::product),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a / b),
            inner.clone().prop_map(Expr::neg),
            (inner.clone(), -3i64..=4).prop_map(|(a, k)| Expr::pow(a, Expr::int(k))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::pow(a, b)),
            (inner.clone(), proptest::sample::select(&[Func::Exp, Func::Log, Func::Sin, Func::Cos, Func::Sqrt][..]))
                .prop_map(|(a, f)| Expr::func(f, a)),
        ]
    })
}

/// Smooth expressions, finite everywhere on bounded boxes.
pub fn smooth_expr(vars: &'static [&'static str]) -> impl Strategy<Value = Expr> {
    leaf(vars).prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a / (Expr::one() + b.clone() * b)),
            (inner.clone(), 0i64..=3).prop_map(|(a, k)| Expr::pow(a, Expr::int(k))),
            inner.clone().prop_map(|a| Expr::func(Func::Sin, a)),
            inner.clone().prop_map(|a| Expr::func(Func::Cos, a)),
            inner.clone().prop_map(|a| Expr::exp(Expr::func(Func::Sin, a))),
            inner.clone().prop_map(|a| Expr::log(Expr::one() + a.clone() * a)),
            inner.clone().prop_map(|a| Expr::func(Func::Sqrt, Expr::int(2) + Expr::func(Func::Cos, a))),
        ]
    })
}

/// Polynomials with small rational coefficients.
pub fn polynomial(vars: &'static [&'static str]) -> impl Strategy<Value = Expr> {
    let monomial = (rational(), proptest::collection::vec(0u32..3, vars.len())).prop_map(move |(c, exps)| {
        Expr::product(
            std::iter::once(c).chain(vars.iter().zip(exps).map(|(v, k)| Expr::pow(Expr::var(v), Expr::int(k as i64)))),
        )
    });
    proptest::collection::vec(monomial, 1..5).prop_map(Expr::sum)
}

/// A uniformly sampled point of `[lo, hi]^vars`.
pub fn sample_point(vars: &'static [&'static str], lo: f64, hi: f64) -> impl Strategy<Value = BTreeMap<String, f64>> {
    proptest::collection::vec(lo..hi, vars.len())
        .prop_map(move |xs| vars.iter().map(|v| v.to_string()).zip(xs).collect())
}
