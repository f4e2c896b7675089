//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | func '(' expr ')' | '(' expr ')'
//! ```

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use super::{Expr, Func};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { offset: usize, name: String },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownFunction { offset, .. } => {
                *offset
            }
        }
    }
}

/// Parses `text` into a normalized expression.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                acc = Expr::sum([acc, rhs]);
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                acc = Expr::sum([acc, Expr::neg(rhs)]);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                acc = Expr::product([acc, rhs]);
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                acc = Expr::quot(acc, rhs);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Expr::pow(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.error(format!("unexpected `{}`", c as char))),
        }
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let end = self.pos;
        let name = std::str::from_utf8(&self.src[start..end]).unwrap();
        let call = self.peek() == Some(b'(');
        match (Func::from_name(name), call) {
            (Some(f), true) => {
                self.pos += 1;
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)` after function argument"));
                }
                Ok(Expr::func(f, arg))
            }
            (Some(_), false) => Err(ParseError::Syntax {
                offset: end,
                message: format!("function `{name}` requires a parenthesized argument"),
            }),
            (None, true) => Err(ParseError::UnknownFunction { offset: start, name: name.into() }),
            (None, false) => Ok(Expr::var(name)),
        }
    }

    fn digits(&mut self) -> &[u8] {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let int_part = self.digits().to_vec();
        let mut frac_part = Vec::new();
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            frac_part = self.digits().to_vec();
        }
        if int_part.is_empty() && frac_part.is_empty() {
            self.pos = start;
            return Err(self.error("malformed number"));
        }
        let mut exponent: i64 = 0;
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            let mut negative = false;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                negative = self.src[self.pos] == b'-';
                self.pos += 1;
            }
            let digits = self.digits();
            if digits.is_empty() {
                self.pos = save;
                return Err(self.error("malformed exponent"));
            }
            let text = std::str::from_utf8(digits).unwrap();
            exponent = text.parse().map_err(|_| ParseError::Syntax {
                offset: save,
                message: "exponent out of range".into(),
            })?;
            if negative {
                exponent = -exponent;
            }
        }
        let mut mantissa: Vec<u8> = int_part;
        mantissa.extend_from_slice(&frac_part);
        let m = BigInt::parse_bytes(&mantissa, 10).unwrap_or_else(BigInt::zero);
        let shift = exponent - frac_part.len() as i64;
        if shift.unsigned_abs() > 4000 {
            return Err(ParseError::Syntax { offset: start, message: "exponent out of range".into() });
        }
        let scale = num_traits::pow(BigInt::from(10), shift.unsigned_abs() as usize);
        let value = if shift >= 0 {
            BigRational::from_integer(m * scale)
        } else {
            BigRational::new(m, scale)
        };
        Ok(Expr::num(value))
    }
}

/// Converts a finite `f64` to the exact rational its shortest decimal
/// representation denotes (so `0.1` becomes `1/10`).
pub(crate) fn decimal_to_rational(x: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let text = format!("{x:e}");
    let negative = text.starts_with('-');
    let body = text.trim_start_matches('-');
    let e = parse(body).ok()?;
    let r = e.as_num()?.clone();
    Some(if negative { -r } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Node;

    #[test]
    fn grammar_example_product() {
        let e = parse("q1^2*p1/2").unwrap();
        match e.node() {
            Node::Product(items) => {
                assert_eq!(items.len(), 3);
                assert_eq!(items[0], Expr::ratio(1, 2));
                assert_eq!(items[1], Expr::pow(Expr::var("q1"), Expr::int(2)));
                assert_eq!(items[2], Expr::var("p1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grammar_example_negated_sum() {
        let e = parse("-(q1*p2+q2*p1)").unwrap();
        match e.node() {
            Node::Neg(inner) => assert!(matches!(inner.node(), Node::Sum(v) if v.len() == 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn function_without_parentheses_is_syntax_error() {
        let err = parse("log q1").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 3, .. }), "{err:?}");
    }

    #[test]
    fn unknown_function_reports_offset() {
        let err = parse("1 + tan(x)").unwrap_err();
        assert_eq!(err, ParseError::UnknownFunction { offset: 4, name: "tan".into() });
    }

    #[test]
    fn numbers_are_exact() {
        assert_eq!(parse("0.1").unwrap(), Expr::ratio(1, 10));
        assert_eq!(parse("2.5e-3").unwrap(), Expr::ratio(1, 400));
        assert_eq!(parse("1E2").unwrap(), Expr::int(100));
        assert_eq!(parse(".5").unwrap(), Expr::ratio(1, 2));
    }

    #[test]
    fn power_is_right_associative_and_binds_tighter_than_minus() {
        let e = parse("a^b^c").unwrap();
        assert_eq!(e, Expr::pow(Expr::var("a"), Expr::pow(Expr::var("b"), Expr::var("c"))));
        let e = parse("-x^2").unwrap();
        assert_eq!(e, Expr::neg(Expr::pow(Expr::var("x"), Expr::int(2))));
        let e = parse("x^-1").unwrap();
        assert_eq!(e, Expr::pow(Expr::var("x"), Expr::int(-1)));
    }

    #[test]
    fn whitespace_is_insignificant() {
        assert_eq!(parse(" exp ( x ) * 2 ").unwrap(), parse("exp(x)*2").unwrap());
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        assert!(matches!(parse("x y"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(parse("(x").is_err());
        assert!(parse("").is_err());
        assert!(parse("1e").is_err());
    }

    #[test]
    fn decimal_conversion() {
        assert_eq!(decimal_to_rational(0.1).unwrap(), crate::expr::rational(1, 10));
        assert_eq!(decimal_to_rational(-2.0).unwrap(), crate::expr::rational(-2, 1));
        assert!(decimal_to_rational(f64::NAN).is_none());
    }
}
