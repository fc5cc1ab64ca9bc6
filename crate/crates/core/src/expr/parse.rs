//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr     := term (('+'|'-') term)*
//! term     := factor (('*'|'/') factor)*
//! factor   := base ('^' exponent)?
//! base     := number | ident | '(' expr ')' | func '(' expr ')' | '-' base
//! exponent := signed number, optionally '/' integer | base
//! ```
//!
//! Decimal literals without an exponent are exact rationals; literals with an
//! exponent (`2.5e-1`) are reals. Unary minus binds tighter than `^`.

use std::collections::BTreeMap;

use num_rational::Rational64;
use thiserror::Error;

use super::{Expr, Func, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("function `{func}` at {pos} takes exactly one argument, got {got}")]
    Arity {
        func: String,
        pos: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Scalar),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start).map(|t| (t, start));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self
                .src
                .get(self.pos)
                .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .to_string();
            return Ok((Tok::Ident(name), start));
        }
        if b"+-*/^(),".contains(&c) {
            self.pos += 1;
            return Ok((Tok::Op(c as char), start));
        }
        Err(ParseError::Syntax {
            pos: start,
            msg: format!("unexpected character `{}`", c as char),
        })
    }

    fn number(&mut self, start: usize) -> Result<Tok, ParseError> {
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.src.get(lx.pos).is_some_and(u8::is_ascii_digit) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let int_len = digits(self);
        let mut frac_len = 0;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            frac_len = digits(self);
        }
        if int_len + frac_len == 0 {
            return Err(ParseError::Syntax {
                pos: start,
                msg: "malformed number".into(),
            });
        }
        let mut has_exp = false;
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            } else {
                has_exp = true;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if has_exp {
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                pos: start,
                msg: "malformed number".into(),
            })?;
            return Ok(Tok::Num(Scalar::real(v)));
        }
        Ok(Tok::Num(exact_decimal(text)))
    }
}

/// Decimal text without exponent as an exact rational, falling back to a
/// real when it does not fit in 64 bits.
fn exact_decimal(text: &str) -> Scalar {
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    let digits = format!("{int}{frac}");
    let digits = digits.trim_start_matches('0');
    let num = if digits.is_empty() {
        Some(0)
    } else {
        digits.parse::<i64>().ok()
    };
    let den = 10i64.checked_pow(frac.len() as u32);
    match (num, den) {
        (Some(n), Some(d)) => Scalar::Rational(Rational64::new(n, d)),
        _ => Scalar::real(text.parse().unwrap_or(f64::NAN)),
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    pos: usize,
    chart: &'a [&'a str],
    params: &'a BTreeMap<String, Scalar>,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, pos) = self.lexer.next()?;
        self.tok = tok;
        self.pos = pos;
        Ok(())
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        if self.tok == Tok::Op(op) {
            self.bump()
        } else {
            self.syntax(format!("expected `{op}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.tok {
                Tok::Op('+') => {
                    self.bump()?;
                    acc = acc + self.term()?;
                }
                Tok::Op('-') => {
                    self.bump()?;
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.tok {
                Tok::Op('*') => {
                    self.bump()?;
                    acc = acc * self.factor()?;
                }
                Tok::Op('/') => {
                    self.bump()?;
                    acc = acc / self.factor()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.tok != Tok::Op('^') {
            return Ok(base);
        }
        self.bump()?;
        let exponent = self.exponent()?;
        Ok(Expr::power(base, exponent))
    }

    fn exponent(&mut self) -> Result<Expr, ParseError> {
        let negative = match self.tok {
            Tok::Op('-') | Tok::Op('+') => {
                let neg = self.tok == Tok::Op('-');
                let save = (self.lexer.pos, self.tok.clone(), self.pos);
                self.bump()?;
                if !matches!(self.tok, Tok::Num(_)) {
                    // `x^-y`: fall back to a negated base.
                    self.lexer.pos = save.0;
                    self.tok = save.1;
                    self.pos = save.2;
                    return self.base();
                }
                neg
            }
            _ => false,
        };
        let Tok::Num(n) = self.tok else {
            return self.base();
        };
        self.bump()?;
        let mut value = if negative { n.neg() } else { n };
        if self.tok == Tok::Op('/') {
            self.bump()?;
            let Tok::Num(d) = self.tok else {
                return self.syntax("expected integer denominator in exponent");
            };
            if d.as_integer().is_none() || d.is_zero() {
                return self.syntax("exponent denominator must be a non-zero integer");
            }
            self.bump()?;
            value = value.div(d).expect("non-zero denominator");
        }
        Ok(Expr::constant(value))
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.tok.clone() {
            Tok::Num(n) => {
                self.bump()?;
                Ok(Expr::constant(n))
            }
            Tok::Op('-') => {
                self.bump()?;
                Ok(-self.base()?)
            }
            Tok::Op('(') => {
                self.bump()?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let pos = self.pos;
                self.bump()?;
                if let Some(func) = Func::from_name(&name) {
                    return self.call(func, pos);
                }
                if let Some(i) = self.chart.iter().position(|v| *v == name) {
                    return Ok(Expr::var(i, &name));
                }
                if let Some(value) = self.params.get(&name) {
                    return Ok(Expr::constant(*value));
                }
                Err(ParseError::UnknownIdentifier { name, pos })
            }
            Tok::End => self.syntax("unexpected end of input"),
            Tok::Op(c) => self.syntax(format!("unexpected `{c}`")),
        }
    }

    fn call(&mut self, func: Func, pos: usize) -> Result<Expr, ParseError> {
        if self.tok != Tok::Op('(') {
            return self.syntax(format!("expected `(` after `{}`", func.name()));
        }
        self.bump()?;
        if self.tok == Tok::Op(')') {
            return Err(ParseError::Arity {
                func: func.name().into(),
                pos,
                got: 0,
            });
        }
        let arg = self.expr()?;
        let mut got = 1;
        while self.tok == Tok::Op(',') {
            self.bump()?;
            self.expr()?;
            got += 1;
        }
        if got != 1 {
            return Err(ParseError::Arity {
                func: func.name().into(),
                pos,
                got,
            });
        }
        self.expect(')')?;
        Ok(Expr::apply(func, arg))
    }
}

/// Parses `source` over the chart variables `chart` (variable `i` is `chart[i]`).
pub fn parse_expr(source: &str, chart: &[&str]) -> Result<Expr, ParseError> {
    parse_expr_with_params(source, chart, &BTreeMap::new())
}

/// Like [`parse_expr`], additionally binding named parameters to constants.
pub fn parse_expr_with_params(
    source: &str,
    chart: &[&str],
    params: &BTreeMap<String, Scalar>,
) -> Result<Expr, ParseError> {
    let mut p = Parser {
        lexer: Lexer {
            src: source.as_bytes(),
            pos: 0,
        },
        tok: Tok::End,
        pos: 0,
        chart,
        params,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.syntax("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHART: [&str; 3] = ["x", "y", "w"];

    fn p(s: &str) -> Expr {
        parse_expr(s, &CHART).unwrap()
    }

    #[test]
    fn precedence() {
        let e = p("1 + 2*x^2");
        assert!((e.eval(&[3.0, 0.0, 0.0]).unwrap() - 19.0).abs() < 1e-12);
        // unary minus binds tighter than ^
        assert!((p("-x^2").eval(&[3.0, 0.0, 0.0]).unwrap() - 9.0).abs() < 1e-12);
        assert!((p("x/2/4").eval(&[8.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn numbers() {
        assert_eq!(p("0.25"), Expr::ratio(1, 4));
        assert_eq!(p("2.5e-1"), Expr::real(0.25));
        assert_eq!(p("x^1/2"), p("x^(1/2)"));
        assert_eq!(p("x^-3/2"), Expr::var(0, "x").pow_ratio(-3, 2));
        assert!(parse_expr("3e", &CHART).is_err());
    }

    #[test]
    fn parameters_are_constants() {
        let mut params = BTreeMap::new();
        params.insert("nu".to_string(), Scalar::ratio(3, 2));
        let e = parse_expr_with_params("exp(nu*w)", &CHART, &params).unwrap();
        assert_eq!(e, (Expr::ratio(3, 2) * Expr::var(2, "w")).exp());
        let err = parse_expr("exp(nu*w)*cosh(w*sqrt(4-nu^2))", &CHART).unwrap_err();
        assert!(matches!(err, ParseError::UnknownIdentifier { ref name, pos: 4 } if name == "nu"));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_expr("x +", &CHART),
            Err(ParseError::Syntax { pos: 3, .. })
        ));
        assert!(matches!(
            parse_expr("(x", &CHART),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            parse_expr("sin(x, y)", &CHART),
            Err(ParseError::Arity { got: 2, .. })
        ));
        assert!(matches!(
            parse_expr("sin()", &CHART),
            Err(ParseError::Arity { got: 0, .. })
        ));
        assert!(matches!(
            parse_expr("x $ y", &CHART),
            Err(ParseError::Syntax { pos: 2, .. })
        ));
        assert!(matches!(
            parse_expr("x y", &CHART),
            Err(ParseError::Syntax { .. })
        ));
    }
}
