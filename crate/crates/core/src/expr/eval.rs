use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use thiserror::Error;

use super::{Expr, Func, Node};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error in `{subexpr}`: {message}")]
    Domain { subexpr: String, message: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
}

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Var(usize),
    Sum(Vec<Op>),
    Product(Vec<Op>),
    Neg(Box<Op>),
    /// Base, exponent, exponent when it is a small integer, site index.
    Pow(Box<Op>, Box<Op>, Option<i32>, usize),
    Quot(Box<Op>, Box<Op>, usize),
    Func(Func, Box<Op>, usize),
}

/// An expression compiled against a fixed variable ordering.
#[derive(Debug, Clone)]
pub struct Compiled {
    root: Op,
    sites: Vec<Expr>,
}

impl Compiled {
    /// Compiles `e`; every free variable must appear in `vars`.
    pub fn new<S: AsRef<str>>(e: &Expr, vars: &[S]) -> Result<Compiled, EvalError> {
        let index: BTreeMap<&str, usize> =
            vars.iter().enumerate().map(|(i, v)| (v.as_ref(), i)).collect();
        let mut sites = Vec::new();
        let root = compile(e, &index, &mut sites)?;
        Ok(Compiled { root, sites })
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        run(&self.root, values, &self.sites)
    }
}

fn compile(e: &Expr, index: &BTreeMap<&str, usize>, sites: &mut Vec<Expr>) -> Result<Op, EvalError> {
    Ok(match e.node() {
        Node::Num(r) => Op::Const(r.to_f64().unwrap_or(f64::NAN)),
        Node::Var(v) => Op::Var(*index.get(&**v).ok_or_else(|| EvalError::Unbound(v.to_string()))?),
        Node::Sum(items) => {
            Op::Sum(items.iter().map(|x| compile(x, index, sites)).collect::<Result<_, _>>()?)
        }
        Node::Product(items) => {
            Op::Product(items.iter().map(|x| compile(x, index, sites)).collect::<Result<_, _>>()?)
        }
        Node::Neg(x) => Op::Neg(Box::new(compile(x, index, sites)?)),
        Node::Pow(b, k) => {
            let small = k
                .as_num()
                .filter(|r| r.is_integer())
                .and_then(|r| r.to_integer().to_i32());
            let s = push_site(sites, e);
            Op::Pow(Box::new(compile(b, index, sites)?), Box::new(compile(k, index, sites)?), small, s)
        }
        Node::Quot(a, b) => {
            let s = push_site(sites, e);
            Op::Quot(Box::new(compile(a, index, sites)?), Box::new(compile(b, index, sites)?), s)
        }
        Node::Func(f, a) => {
            let s = push_site(sites, e);
            Op::Func(*f, Box::new(compile(a, index, sites)?), s)
        }
    })
}

fn push_site(sites: &mut Vec<Expr>, e: &Expr) -> usize {
    sites.push(e.clone());
    sites.len() - 1
}

fn domain(sites: &[Expr], site: usize, message: &str) -> EvalError {
    EvalError::Domain { subexpr: sites[site].to_string(), message: message.to_string() }
}

fn run(op: &Op, x: &[f64], sites: &[Expr]) -> Result<f64, EvalError> {
    Ok(match op {
        Op::Const(c) => *c,
        Op::Var(i) => x[*i],
        Op::Sum(items) => {
            let mut acc = 0.0;
            for it in items {
                acc += run(it, x, sites)?;
            }
            acc
        }
        Op::Product(items) => {
            let mut acc = 1.0;
            for it in items {
                acc *= run(it, x, sites)?;
            }
            acc
        }
        Op::Neg(a) => -run(a, x, sites)?,
        Op::Quot(a, b, s) => {
            let num = run(a, x, sites)?;
            let den = run(b, x, sites)?;
            if den == 0.0 {
                return Err(domain(sites, *s, "division by zero"));
            }
            num / den
        }
        Op::Pow(b, k, small, s) => {
            let base = run(b, x, sites)?;
            let value = match small {
                Some(n) => {
                    if base == 0.0 && *n < 0 {
                        return Err(domain(sites, *s, "zero to a negative power"));
                    }
                    base.powi(*n)
                }
                None => {
                    let e = run(k, x, sites)?;
                    if base < 0.0 && e.fract() != 0.0 {
                        return Err(domain(sites, *s, "negative base with non-integer exponent"));
                    }
                    if base == 0.0 && e < 0.0 {
                        return Err(domain(sites, *s, "zero to a negative power"));
                    }
                    base.powf(e)
                }
            };
            if !value.is_finite() {
                return Err(domain(sites, *s, "non-finite power"));
            }
            value
        }
        Op::Func(f, a, s) => {
            let v = run(a, x, sites)?;
            let value = match f {
                Func::Exp => v.exp(),
                Func::Log => {
                    if v <= 0.0 {
                        return Err(domain(sites, *s, "logarithm of a non-positive number"));
                    }
                    v.ln()
                }
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(domain(sites, *s, "square root of a negative number"));
                    }
                    v.sqrt()
                }
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
            };
            if !value.is_finite() {
                return Err(domain(sites, *s, "non-finite result"));
            }
            value
        }
    })
}

/// Evaluates `e` at `point`, which must bind every free variable.
pub fn evaluate(e: &Expr, point: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
    let names: Vec<&String> = point.keys().collect();
    let values: Vec<f64> = point.values().copied().collect();
    Compiled::new(e, &names)?.eval(&values)
}
