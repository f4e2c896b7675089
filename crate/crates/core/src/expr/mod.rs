//! Minimal computer-algebra kernel.
//!
//! [`Expr`] is an immutable, reference-counted expression tree over named
//! real variables with exact rational constants. Trees are only built through
//! the smart constructors on [`Expr`], which keep a light normal form:
//!
//! * sums and products are flattened and never empty;
//! * numeric terms of a sum are folded into one constant, numeric factors of
//!   a product into a leading coefficient (never `1` or `-1`);
//! * signs are hoisted: [`Node::Neg`] never wraps a number, another negation
//!   or a product carrying a coefficient, and quotients never carry a sign in
//!   numerator or denominator;
//! * division by a nonzero constant becomes multiplication by its reciprocal.
//!
//! Heavier rewriting (collection of like terms, expansion, exp/log rules)
//! lives in [`simplify`](crate::expr::simplify()).

mod diff;
mod eval;
mod format;
mod parse;
mod simplify;
mod zero;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use eval::{evaluate, Compiled, EvalError};
pub use parse::{parse, ParseError};
pub use simplify::simplify;
pub(crate) use parse::decimal_to_rational;
pub use zero::{
    all_hold, is_identically_zero, residual_at, DomainBox, NamedVerdict, Verifier,
    ZeroTestConfig, ZeroVerdict, DEFAULT_INTERVAL,
};

/// Elementary functions of one argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// One node of an expression tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Num(BigRational),
    Var(Arc<str>),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Expr, Expr),
    Quot(Expr, Expr),
    Neg(Expr),
    Func(Func, Expr),
}

/// Immutable symbolic expression. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub(crate) fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl Expr {
    fn from_node(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn num(value: BigRational) -> Expr {
        Expr::from_node(Node::Num(value))
    }

    pub fn int(value: i64) -> Expr {
        Expr::num(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::num(rational(n, d))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(name: &str) -> Expr {
        Expr::from_node(Node::Var(Arc::from(name)))
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self.node() {
            Node::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_one())
    }

    /// Sum of `items`, flattened, with numeric terms folded.
    pub fn sum(items: impl IntoIterator<Item = Expr>) -> Expr {
        let mut flat = Vec::new();
        for item in items {
            match item.node() {
                Node::Sum(inner) => flat.extend(inner.iter().cloned()),
                _ => flat.push(item),
            }
        }
        let numeric = flat.iter().filter(|e| e.as_num().is_some()).count();
        if numeric > 1 {
            let total: BigRational = flat.iter().filter_map(|e| e.as_num()).sum();
            let first = flat.iter().position(|e| e.as_num().is_some()).unwrap();
            let mut folded = Vec::with_capacity(flat.len());
            for (i, e) in flat.into_iter().enumerate() {
                if i == first {
                    folded.push(Expr::num(total.clone()));
                } else if e.as_num().is_none() {
                    folded.push(e);
                }
            }
            flat = folded;
        }
        flat.retain(|e| !e.is_zero());
        match flat.len() {
            0 => Expr::zero(),
            1 => flat.pop().unwrap(),
            _ => Expr::from_node(Node::Sum(flat)),
        }
    }

    /// Product of `items`, flattened, with numeric factors and signs folded
    /// into a leading coefficient.
    pub fn product(items: impl IntoIterator<Item = Expr>) -> Expr {
        let mut coeff = BigRational::one();
        let mut rest = Vec::new();
        let mut stack: Vec<Expr> = items.into_iter().collect();
        stack.reverse();
        while let Some(item) = stack.pop() {
            match item.node() {
                Node::Num(r) => coeff *= r,
                Node::Product(inner) => {
                    for e in inner.iter().rev() {
                        stack.push(e.clone());
                    }
                }
                Node::Neg(inner) => {
                    coeff = -coeff;
                    stack.push(inner.clone());
                }
                _ => rest.push(item),
            }
        }
        if coeff.is_zero() {
            return Expr::zero();
        }
        if rest.is_empty() {
            return Expr::num(coeff);
        }
        let negative = coeff == -BigRational::one();
        let body = if coeff.is_one() || negative {
            if rest.len() == 1 {
                rest.pop().unwrap()
            } else {
                Expr::from_node(Node::Product(rest))
            }
        } else {
            let mut all = Vec::with_capacity(rest.len() + 1);
            all.push(Expr::num(coeff));
            all.extend(rest);
            Expr::from_node(Node::Product(all))
        };
        if negative {
            Expr::from_node(Node::Neg(body))
        } else {
            body
        }
    }

    pub fn neg(x: Expr) -> Expr {
        match x.node() {
            Node::Num(r) => Expr::num(-r),
            Node::Neg(inner) => inner.clone(),
            Node::Product(items) if items[0].as_num().is_some() => {
                let c = -items[0].as_num().unwrap();
                Expr::product(std::iter::once(Expr::num(c)).chain(items[1..].iter().cloned()))
            }
            _ => Expr::from_node(Node::Neg(x)),
        }
    }

    /// Splits off a leading sign: returns `(true, |x|)` when `x` is a
    /// negation, a negative number or a product with negative coefficient.
    pub(crate) fn split_sign(&self) -> (bool, Expr) {
        match self.node() {
            Node::Neg(inner) => (true, inner.clone()),
            Node::Num(r) if r.is_negative() => (true, Expr::num(-r)),
            Node::Product(items) if items[0].as_num().is_some_and(|c| c.is_negative()) => {
                (true, Expr::neg(self.clone()))
            }
            _ => (false, self.clone()),
        }
    }

    pub fn quot(a: Expr, b: Expr) -> Expr {
        if let Some(d) = b.as_num() {
            if !d.is_zero() {
                return Expr::product([Expr::num(d.recip()), a]);
            }
        }
        if a.is_zero() && !b.is_zero() {
            return Expr::zero();
        }
        let (na, a) = a.split_sign();
        let (nb, b) = b.split_sign();
        let body = Expr::from_node(Node::Quot(a, b));
        if na != nb {
            Expr::from_node(Node::Neg(body))
        } else {
            body
        }
    }

    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        if let Some(k) = exponent.as_num() {
            if k.is_zero() {
                return Expr::one();
            }
            if k.is_one() {
                return base;
            }
            if let Some(b) = base.as_num() {
                if k.is_integer() {
                    if let Some(e) = k.to_integer().to_i32() {
                        if e.abs() <= 64 && !(b.is_zero() && e < 0) {
                            return Expr::num(num_traits::pow::Pow::pow(b, e));
                        }
                    }
                }
                if b.is_one() {
                    return Expr::one();
                }
                if b.is_zero() && k.is_positive() {
                    return Expr::zero();
                }
            }
        }
        Expr::from_node(Node::Pow(base, exponent))
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        if let Some(r) = arg.as_num() {
            match f {
                Func::Exp | Func::Cos if r.is_zero() => return Expr::one(),
                Func::Sin | Func::Sqrt if r.is_zero() => return Expr::zero(),
                Func::Log if r.is_one() => return Expr::zero(),
                Func::Sqrt if r.is_one() => return Expr::one(),
                _ => {}
            }
        }
        Expr::from_node(Node::Func(f, arg))
    }

    pub fn exp(arg: Expr) -> Expr {
        Expr::func(Func::Exp, arg)
    }

    pub fn log(arg: Expr) -> Expr {
        Expr::func(Func::Log, arg)
    }

    /// Rebuilds the tree bottom-up through the smart constructors.
    pub fn normalize(&self) -> Expr {
        self.map_children(|c| c.normalize())
    }

    /// Applies `f` to every direct child and reassembles with the smart
    /// constructors.
    pub(crate) fn map_children(&self, mut f: impl FnMut(&Expr) -> Expr) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Var(_) => self.clone(),
            Node::Sum(items) => Expr::sum(items.iter().map(&mut f)),
            Node::Product(items) => Expr::product(items.iter().map(&mut f)),
            Node::Pow(b, e) => Expr::pow(f(b), f(e)),
            Node::Quot(a, b) => Expr::quot(f(a), f(b)),
            Node::Neg(x) => Expr::neg(f(x)),
            Node::Func(func, a) => Expr::func(*func, f(a)),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self.node() {
            Node::Num(_) => {}
            Node::Var(v) => {
                if !out.contains(&**v) {
                    out.insert(v.to_string());
                }
            }
            Node::Sum(items) | Node::Product(items) => {
                items.iter().for_each(|e| e.collect_vars(out))
            }
            Node::Pow(a, b) | Node::Quot(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Node::Neg(x) | Node::Func(_, x) => x.collect_vars(out),
        }
    }

    pub fn contains_var(&self, name: &str) -> bool {
        match self.node() {
            Node::Num(_) => false,
            Node::Var(v) => &**v == name,
            Node::Sum(items) | Node::Product(items) => items.iter().any(|e| e.contains_var(name)),
            Node::Pow(a, b) | Node::Quot(a, b) => a.contains_var(name) || b.contains_var(name),
            Node::Neg(x) | Node::Func(_, x) => x.contains_var(name),
        }
    }

    /// Simultaneous substitution; replacement expressions are not re-scanned.
    pub fn substitute(&self, bindings: &BTreeMap<String, Expr>) -> Expr {
        if bindings.is_empty() {
            return self.clone();
        }
        self.subst_inner(bindings)
    }

    fn subst_inner(&self, bindings: &BTreeMap<String, Expr>) -> Expr {
        match self.node() {
            Node::Var(v) => bindings.get(&**v).cloned().unwrap_or_else(|| self.clone()),
            Node::Num(_) => self.clone(),
            _ => self.map_children(|c| c.subst_inner(bindings)),
        }
    }

    /// Exact partial derivative with respect to `var`, simplified.
    pub fn differentiate(&self, var: &str) -> Expr {
        simplify(&diff::derivative(self, var))
    }

    /// Exact partial derivative without the final simplification pass.
    pub fn derivative_raw(&self, var: &str) -> Expr {
        diff::derivative(self, var)
    }

    /// Top-level additive terms (the expression itself if it is not a sum).
    pub fn additive_terms(&self) -> Vec<Expr> {
        match self.node() {
            Node::Sum(items) => items.clone(),
            _ => vec![self.clone()],
        }
    }
}

/// Differentiates `e` with respect to `var` (simplified result).
pub fn differentiate(e: &Expr, var: &str) -> Expr {
    e.differentiate(var)
}

/// Simultaneous substitution of variables by expressions.
pub fn substitute(e: &Expr, bindings: &BTreeMap<String, Expr>) -> Expr {
    e.substitute(bindings)
}

/// Formats an expression in the input grammar.
pub fn format(e: &Expr) -> String {
    e.to_string()
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum([self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sum([self, Expr::neg(rhs)])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product([self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::quot(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Expr, ParseError> {
        parse(s)
    }
}

/// Variable bindings for substitution, built from `(name, expression)` pairs.
pub fn bindings<I, S>(pairs: I) -> BTreeMap<String, Expr>
where
    I: IntoIterator<Item = (S, Expr)>,
    S: Into<String>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v)).collect()
}
