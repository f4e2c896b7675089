//! Sum-of-terms normal form.
//!
//! An expression is expanded into a polynomial over *atoms* (variables,
//! function applications, non-expandable powers and sums) with rational
//! exponents and rational coefficients. Like terms are collected and the
//! result is rebuilt with the smart constructors.
//!
//! Rewrites beyond plain algebra assume the positive domain the engine
//! samples on: `log(x*y) = log(x) + log(y)`, `(x^a)^b = x^(a*b)`.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{Expr, Func, Node};

/// Largest number of terms an expansion may produce before the factor is
/// kept as an opaque atom instead.
const EXPANSION_CAP: usize = 1000;

/// Largest integer exponent folded into an exact rational coefficient.
const MAX_FOLD_EXPONENT: i32 = 64;

type Factors = BTreeMap<Expr, BigRational>;
type Poly = BTreeMap<Factors, BigRational>;

/// Returns an expression pointwise equal to `e` in sum-of-terms normal form.
pub fn simplify(e: &Expr) -> Expr {
    rebuild(&to_terms(e))
}

fn constant(c: BigRational) -> Poly {
    let mut p = Poly::new();
    if !c.is_zero() {
        p.insert(Factors::new(), c);
    }
    p
}

fn atom(a: Expr, k: BigRational) -> Poly {
    let mut f = Factors::new();
    f.insert(a, k);
    finalize(BigRational::one(), f)
}

fn as_constant(p: &Poly) -> Option<BigRational> {
    match p.len() {
        0 => Some(BigRational::zero()),
        1 => {
            let (f, c) = p.iter().next().unwrap();
            f.is_empty().then(|| c.clone())
        }
        _ => None,
    }
}

fn add_into(acc: &mut Poly, f: Factors, c: BigRational) {
    if c.is_zero() {
        return;
    }
    match acc.entry(f) {
        Entry::Occupied(mut slot) => {
            *slot.get_mut() += c;
            if slot.get().is_zero() {
                slot.remove();
            }
        }
        Entry::Vacant(slot) => {
            slot.insert(c);
        }
    }
}

fn add(mut a: Poly, b: Poly) -> Poly {
    for (f, c) in b {
        add_into(&mut a, f, c);
    }
    a
}

fn negate(p: Poly) -> Poly {
    p.into_iter().map(|(f, c)| (f, -c)).collect()
}

fn scale(p: Poly, k: &BigRational) -> Poly {
    if k.is_zero() {
        return Poly::new();
    }
    p.into_iter().map(|(f, c)| (f, c * k)).collect()
}

fn mul_terms(fa: &Factors, ca: &BigRational, fb: &Factors, cb: &BigRational) -> Poly {
    let mut f = fa.clone();
    for (atom, k) in fb {
        let slot = f.entry(atom.clone()).or_insert_with(BigRational::zero);
        *slot += k;
    }
    finalize(ca * cb, f)
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Poly::new();
    }
    if a.len() * b.len() > EXPANSION_CAP {
        let (small, big) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        let opaque = atom(rebuild(big), BigRational::one());
        return mul(small, &opaque);
    }
    let mut out = Poly::new();
    for (fa, ca) in a {
        for (fb, cb) in b {
            for (f, c) in mul_terms(fa, ca, fb, cb) {
                add_into(&mut out, f, c);
            }
        }
    }
    out
}

fn int_exponent(k: &BigRational) -> Option<i32> {
    if k.is_integer() {
        k.to_integer().to_i32()
    } else {
        None
    }
}

/// Upper bound on the number of terms of `(m terms)^k`.
fn expansion_size(m: usize, k: u32) -> usize {
    // C(m + k - 1, k), saturating.
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (m as u128 + i) / (i + 1);
        if acc > EXPANSION_CAP as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

fn pow_poly(p: &Poly, k: &BigRational) -> Poly {
    if k.is_zero() {
        return constant(BigRational::one());
    }
    if k.is_one() {
        return p.clone();
    }
    if p.is_empty() {
        return if k.is_positive() { Poly::new() } else { atom(Expr::zero(), k.clone()) };
    }
    if p.len() == 1 {
        let (f, c) = p.iter().next().unwrap();
        let mut factors: Factors = f.iter().map(|(a, e)| (a.clone(), e * k)).collect();
        if let Some(e) = int_exponent(k).filter(|e| e.abs() <= MAX_FOLD_EXPONENT) {
            return finalize(num_traits::pow::Pow::pow(c, e), factors);
        }
        if c.is_positive() {
            if !c.is_one() {
                let slot = factors.entry(Expr::num(c.clone())).or_insert_with(BigRational::zero);
                *slot += k;
            }
            return finalize(BigRational::one(), factors);
        }
        return atom(rebuild(p), k.clone());
    }
    match int_exponent(k) {
        Some(e) if e > 1 && expansion_size(p.len(), e as u32) <= EXPANSION_CAP => {
            let mut acc = p.clone();
            for _ in 1..e {
                acc = mul(&acc, p);
            }
            acc
        }
        _ => atom(rebuild(p), k.clone()),
    }
}

/// Canonicalizes the factor map of one term: drops zero exponents, folds
/// integer powers of numbers into the coefficient, merges exponentials and
/// squares of square roots.
fn finalize(mut coeff: BigRational, factors: Factors) -> Poly {
    if coeff.is_zero() {
        return Poly::new();
    }
    let mut kept = Factors::new();
    let mut exp_arg: Vec<(Expr, BigRational)> = Vec::new();
    let mut extra: Vec<Poly> = Vec::new();
    for (a, k) in factors {
        if k.is_zero() {
            continue;
        }
        match a.node() {
            Node::Num(r) if !r.is_zero() => {
                if let Some(e) = int_exponent(&k).filter(|e| e.abs() <= MAX_FOLD_EXPONENT) {
                    coeff *= num_traits::pow::Pow::pow(r, e);
                    continue;
                }
                kept.insert(a, k);
            }
            Node::Func(Func::Exp, arg) => exp_arg.push((arg.clone(), k)),
            Node::Func(Func::Sqrt, arg) => match int_exponent(&k) {
                Some(e) if e.abs() >= 2 => {
                    let half = e / 2;
                    let rest = e - half * 2;
                    extra.push(pow_poly(&to_terms(arg), &BigRational::from_integer(half.into())));
                    if rest != 0 {
                        kept.insert(a.clone(), BigRational::from_integer(rest.into()));
                    }
                }
                _ => {
                    kept.insert(a, k);
                }
            },
            _ => {
                kept.insert(a, k);
            }
        }
    }
    if !(exp_arg.is_empty() || exp_arg.len() == 1 && exp_arg[0].1.is_one()) {
        let combined = Expr::sum(
            exp_arg.iter().map(|(arg, k)| Expr::product([Expr::num(k.clone()), arg.clone()])),
        );
        let merged = simplify(&combined);
        if !merged.is_zero() {
            kept.insert(Expr::exp(merged), BigRational::one());
        }
    } else if let Some((arg, k)) = exp_arg.pop() {
        kept.insert(Expr::exp(arg), k);
    }
    let mut out = Poly::new();
    out.insert(kept, coeff);
    for p in extra {
        out = mul(&out, &p);
    }
    out
}

/// Expands `e` into collected terms.
fn to_terms(e: &Expr) -> Poly {
    match e.node() {
        Node::Num(r) => constant(r.clone()),
        Node::Var(_) => atom(e.clone(), BigRational::one()),
        Node::Sum(items) => items.iter().fold(Poly::new(), |acc, x| add(acc, to_terms(x))),
        Node::Product(items) => {
            let mut acc = constant(BigRational::one());
            for x in items {
                acc = mul(&acc, &to_terms(x));
                if acc.is_empty() {
                    break;
                }
            }
            acc
        }
        Node::Neg(x) => negate(to_terms(x)),
        Node::Quot(..) => quotient_terms(e),
        Node::Pow(base, exponent) => {
            let pe = to_terms(exponent);
            let pb = to_terms(base);
            match as_constant(&pe) {
                Some(k) => pow_poly(&pb, &k),
                None => atom(Expr::pow(rebuild(&pb), rebuild(&pe)), BigRational::one()),
            }
        }
        Node::Func(f, arg) => func_terms(*f, &to_terms(arg)),
    }
}

fn factor_list(e: &Expr, sign: i64, out: &mut Vec<(Expr, i64)>) {
    match e.node() {
        Node::Product(items) => items.iter().for_each(|x| factor_list(x, sign, out)),
        Node::Neg(x) => {
            out.push((Expr::int(-1), 1));
            factor_list(x, sign, out);
        }
        Node::Quot(a, b) => {
            factor_list(a, sign, out);
            factor_list(b, -sign, out);
        }
        Node::Pow(b, k) => match k.as_num().and_then(int_exponent) {
            Some(k) => out.push((b.clone(), sign * i64::from(k))),
            None => out.push((e.clone(), sign)),
        },
        _ => out.push((e.clone(), sign)),
    }
}

/// Quotients cancel syntactically identical factors (after simplification)
/// before expanding.
fn quotient_terms(e: &Expr) -> Poly {
    let mut raw = Vec::new();
    factor_list(e, 1, &mut raw);
    let mut grouped: BTreeMap<Expr, (Poly, i64)> = BTreeMap::new();
    for (base, k) in raw {
        let p = to_terms(&base);
        let key = rebuild(&p);
        grouped.entry(key).or_insert((p, 0)).1 += k;
    }
    let mut acc = constant(BigRational::one());
    for (_, (p, k)) in grouped {
        if k == 0 {
            continue;
        }
        acc = mul(&acc, &pow_poly(&p, &BigRational::from_integer(BigInt::from(k))));
    }
    acc
}

/// Splits a single-term `log` argument into a sum of logarithms.
fn log_of_atom(a: &Expr, k: &BigRational) -> Poly {
    match a.node() {
        Node::Func(Func::Exp, y) => scale(to_terms(y), k),
        Node::Func(Func::Sqrt, y) => {
            scale(func_terms(Func::Log, &to_terms(y)), &(k / BigRational::from_integer(2.into())))
        }
        Node::Pow(b, ex) => {
            let lb = func_terms(Func::Log, &to_terms(b));
            scale(mul(&to_terms(ex), &lb), k)
        }
        _ => scale(atom(Expr::log(a.clone()), BigRational::one()), k),
    }
}

fn func_terms(f: Func, arg: &Poly) -> Poly {
    let sa = rebuild(arg);
    match f {
        Func::Exp => {
            if let Node::Func(Func::Log, x) = sa.node() {
                return to_terms(x);
            }
            let mut rest = Poly::new();
            let mut acc = constant(BigRational::one());
            for (factors, c) in arg {
                if factors.len() == 1 {
                    let (a, k) = factors.iter().next().unwrap();
                    if let (Node::Func(Func::Log, x), true) = (a.node(), k.is_one()) {
                        acc = mul(&acc, &pow_poly(&to_terms(x), c));
                        continue;
                    }
                }
                rest.insert(factors.clone(), c.clone());
            }
            if rest.is_empty() {
                acc
            } else {
                mul(&acc, &atom(Expr::exp(rebuild(&rest)), BigRational::one()))
            }
        }
        Func::Log => {
            if let Node::Func(Func::Exp, x) = sa.node() {
                return to_terms(x);
            }
            if arg.len() == 1 {
                let (factors, c) = arg.iter().next().unwrap();
                if c.is_positive() && !(factors.is_empty() && c.is_one()) {
                    let mut acc = Poly::new();
                    if !c.is_one() {
                        acc = atom(Expr::log(Expr::num(c.clone())), BigRational::one());
                    }
                    for (a, k) in factors {
                        acc = add(acc, log_of_atom(a, k));
                    }
                    return acc;
                }
                if c.is_one() && factors.is_empty() {
                    return Poly::new();
                }
            }
            atom(Expr::log(sa), BigRational::one())
        }
        Func::Sqrt => {
            if let Some(r) = as_constant(arg) {
                if let Some(root) = rational_sqrt(&r) {
                    return constant(root);
                }
            }
            opaque_func(f, sa)
        }
        Func::Sin | Func::Cos => opaque_func(f, sa),
    }
}

fn opaque_func(f: Func, sa: Expr) -> Poly {
    let e = Expr::func(f, sa);
    match e.as_num() {
        Some(r) => constant(r.clone()),
        None => atom(e, BigRational::one()),
    }
}

fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    (&n * &n == *r.numer() && &d * &d == *r.denom()).then(|| BigRational::new(n, d))
}

fn factor_expr(a: &Expr, k: &BigRational) -> Expr {
    Expr::pow(a.clone(), Expr::num(k.clone()))
}

fn rebuild_term(factors: &Factors, coeff: &BigRational) -> Expr {
    let mut num = Vec::new();
    let mut den = Vec::new();
    for (a, k) in factors {
        if k.is_positive() {
            num.push(factor_expr(a, k));
        } else {
            den.push(factor_expr(a, &-k));
        }
    }
    if den.is_empty() {
        return Expr::product(std::iter::once(Expr::num(coeff.clone())).chain(num));
    }
    let magnitude = coeff.abs();
    let top = Expr::product(
        std::iter::once(Expr::num(BigRational::from_integer(magnitude.numer().clone()))).chain(num),
    );
    let bottom = Expr::product(
        std::iter::once(Expr::num(BigRational::from_integer(magnitude.denom().clone()))).chain(den),
    );
    let q = Expr::quot(top, bottom);
    if coeff.is_negative() {
        Expr::neg(q)
    } else {
        q
    }
}

fn rebuild(p: &Poly) -> Expr {
    Expr::sum(p.iter().map(|(f, c)| rebuild_term(f, c)))
}
