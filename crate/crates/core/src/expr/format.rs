use std::fmt::{self, Display, Formatter, Write};

use num_traits::{One, Signed};

use super::{Expr, Node};

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_expr(self, f)
    }
}

fn is_natural(e: &Expr) -> bool {
    e.as_num().is_some_and(|r| r.is_integer() && !r.is_negative())
}

/// Atoms that never need parentheses as an operand of `^`.
fn is_tight(e: &Expr) -> bool {
    matches!(e.node(), Node::Var(_) | Node::Func(..)) || is_natural(e)
}

fn parens(e: &Expr, f: &mut Formatter<'_>) -> fmt::Result {
    f.write_char('(')?;
    write_expr(e, f)?;
    f.write_char(')')
}

fn write_expr(e: &Expr, f: &mut Formatter<'_>) -> fmt::Result {
    match e.node() {
        Node::Num(r) => {
            if r.denom().is_one() {
                write!(f, "{}", r.numer())
            } else {
                write!(f, "{}/{}", r.numer(), r.denom())
            }
        }
        Node::Var(v) => f.write_str(v),
        Node::Sum(items) => {
            for (i, item) in items.iter().enumerate() {
                let (negative, magnitude) = item.split_sign();
                match (i, negative) {
                    (0, false) => {}
                    (0, true) => f.write_char('-')?,
                    (_, false) => f.write_str(" + ")?,
                    (_, true) => f.write_str(" - ")?,
                }
                let shown = if negative { &magnitude } else { item };
                if matches!(shown.node(), Node::Sum(_)) {
                    parens(shown, f)?;
                } else {
                    write_expr(shown, f)?;
                }
            }
            Ok(())
        }
        Node::Product(items) => {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    f.write_char('*')?;
                }
                if matches!(item.node(), Node::Sum(_) | Node::Quot(..)) {
                    parens(item, f)?;
                } else {
                    write_expr(item, f)?;
                }
            }
            Ok(())
        }
        Node::Pow(base, exponent) => {
            if is_tight(base) {
                write_expr(base, f)?;
            } else {
                parens(base, f)?;
            }
            f.write_char('^')?;
            if is_tight(exponent) {
                write_expr(exponent, f)
            } else {
                parens(exponent, f)
            }
        }
        Node::Quot(a, b) => {
            let wrap_num = match a.node() {
                Node::Sum(_) | Node::Quot(..) => true,
                Node::Num(r) => !r.is_integer(),
                _ => false,
            };
            if wrap_num {
                parens(a, f)?;
            } else {
                write_expr(a, f)?;
            }
            f.write_char('/')?;
            if is_tight(b) || matches!(b.node(), Node::Pow(..)) {
                write_expr(b, f)
            } else {
                parens(b, f)
            }
        }
        Node::Neg(x) => {
            f.write_char('-')?;
            if matches!(x.node(), Node::Sum(_)) {
                parens(x, f)
            } else {
                write_expr(x, f)
            }
        }
        Node::Func(func, arg) => {
            f.write_str(func.name())?;
            parens(arg, f)
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, Expr};

    fn roundtrip(s: &str) -> String {
        let e = parse(s).unwrap();
        let text = e.to_string();
        assert_eq!(parse(&text).unwrap(), e, "{s} -> {text}");
        text
    }

    #[test]
    fn basic_forms() {
        assert_eq!(Expr::zero().to_string(), "0");
        assert_eq!(Expr::pow(Expr::var("q1"), Expr::int(2)).to_string(), "q1^2");
        assert_eq!(roundtrip("q1^2*p1/2"), "1/2*q1^2*p1");
        assert_eq!(roundtrip("-(q1*p2+q2*p1)"), "-(q1*p2 + q2*p1)");
    }

    #[test]
    fn nested_quotients_keep_precedence() {
        assert_eq!(roundtrip("a/(b/c)"), "a/(b/c)");
        assert_eq!(roundtrip("(a/b)/c"), "(a/b)/c");
        assert_eq!(roundtrip("(a+b)/(c*d)"), "(a + b)/(c*d)");
        assert_eq!(roundtrip("a/b^2"), "a/b^2");
    }

    #[test]
    fn signs_round_trip() {
        for s in [
            "a - b",
            "-a + b",
            "-2*x/y",
            "a - 2*x",
            "x - 3",
            "-2/3 + x",
            "(-2)^x",
            "x^(-1)",
            "x^(1/2)",
            "(-x)^2",
            "a - (b + c)*d",
            "a - -b",
            "exp(-x)*sin(2*y)",
            "2^x^y",
        ] {
            roundtrip(s);
        }
    }
}
