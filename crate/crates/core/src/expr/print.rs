//! Printing in the input grammar. The output re-parses to a structurally
//! identical tree, which is what golden files and `expected` blocks rely on.

use std::fmt::{self, Write};

use super::{Expr, Kind, Scalar};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_expr(&mut out, self);
        f.write_str(&out)
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e.kind() {
        Kind::Add(terms) => {
            for (i, t) in terms.iter().enumerate() {
                if i == 0 {
                    write_term(out, t);
                    continue;
                }
                match t.kind() {
                    Kind::Neg(inner) => {
                        out.push_str(" - ");
                        write_term(out, inner);
                    }
                    Kind::Const(c) if c.is_negative() => {
                        out.push_str(" - ");
                        write_const(out, c.neg());
                    }
                    _ => {
                        out.push_str(" + ");
                        write_term(out, t);
                    }
                }
            }
        }
        Kind::Const(c) => write_const(out, *c),
        _ => write_term(out, e),
    }
}

/// Something that can stand between `+`/`-` signs.
fn write_term(out: &mut String, e: &Expr) {
    match e.kind() {
        Kind::Add(_) => paren(out, e),
        Kind::Mul(xs) => {
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push('*');
                    write_factor(out, x);
                } else if let Kind::Neg(inner) = x.kind() {
                    out.push('-');
                    write_base(out, inner);
                } else {
                    write_factor(out, x);
                }
            }
        }
        Kind::Div(a, b) => {
            match a.kind() {
                Kind::Add(_) => paren(out, a),
                Kind::Const(c) if !is_bare_const(*c) => paren(out, a),
                _ if ends_in_integer_power(a) => paren(out, a),
                _ => write_term(out, a),
            }
            out.push('/');
            write_factor(out, b);
        }
        Kind::Neg(a) => {
            out.push('-');
            write_base(out, a);
        }
        _ => write_factor(out, e),
    }
}

/// A `factor` of the grammar: a base, optionally raised to a power.
fn write_factor(out: &mut String, e: &Expr) {
    match e.kind() {
        Kind::Pow(b, x) => {
            write_base(out, b);
            out.push('^');
            match x.as_const().and_then(Scalar::as_integer) {
                Some(n) if n >= 0 => {
                    let _ = write!(out, "{n}");
                }
                _ => paren(out, x),
            }
        }
        _ => write_base(out, e),
    }
}

fn write_base(out: &mut String, e: &Expr) {
    match e.kind() {
        Kind::Var(v) => out.push_str(&v.name),
        Kind::Const(c) if is_bare_const(*c) => write_const(out, *c),
        Kind::Func(func, a) => {
            out.push_str(func.name());
            out.push('(');
            write_expr(out, a);
            out.push(')');
        }
        _ => paren(out, e),
    }
}

/// Whether the term prints ending in `^n`; a following `/` would read as `^(n/…)`.
fn ends_in_integer_power(e: &Expr) -> bool {
    match e.kind() {
        Kind::Pow(_, x) => x
            .as_const()
            .and_then(Scalar::as_integer)
            .is_some_and(|n| n >= 0),
        Kind::Mul(xs) => xs.len() > 1 && xs.last().is_some_and(ends_in_integer_power),
        Kind::Div(_, b) => ends_in_integer_power(b),
        _ => false,
    }
}

fn paren(out: &mut String, e: &Expr) {
    out.push('(');
    write_expr(out, e);
    out.push(')');
}

/// Non-negative integers and non-negative reals print as a single token.
fn is_bare_const(c: Scalar) -> bool {
    match c {
        Scalar::Rational(r) => r.is_integer() && !c.is_negative(),
        Scalar::Real(_) => !c.is_negative(),
    }
}

fn write_const(out: &mut String, c: Scalar) {
    let _ = write!(out, "{c}");
}

#[cfg(test)]
mod tests {
    use super::super::parse_expr;
    use super::*;

    fn vars() -> Vec<&'static str> {
        vec!["x", "y", "w"]
    }

    fn roundtrip(src: &str) -> (Expr, String) {
        let e = parse_expr(src, &vars()).unwrap();
        let printed = e.to_string();
        let again = parse_expr(&printed, &vars()).unwrap();
        assert_eq!(e, again, "{src} -> {printed}");
        (e, printed)
    }

    #[test]
    fn readable_output() {
        assert_eq!(roundtrip("x + y - 3").1, "x + y - 3");
        assert_eq!(roundtrip("x*(y+1)").1, "x*(y + 1)");
        assert_eq!(roundtrip("exp(2*w)").1, "exp(2*w)");
        assert_eq!(roundtrip("x^(1/2)").1, "x^(1/2)");
        assert_eq!(roundtrip("(x^2)/3").1, "(x^2)/3");
        assert_eq!(roundtrip("(y*x^2)/(2 + x^2)").1, "(y*x^2)/(x^2 + 2)");
        assert_eq!(roundtrip("(y/x^2)/w").1, "(y/x^2)/w");
        assert_eq!(roundtrip("x^-1").1, "x^(-1)");
        assert_eq!(roundtrip("-x*y").1, "-x*y");
        assert_eq!(roundtrip("1/2*x").1, "(1/2)*x");
    }

    #[test]
    fn tricky_shapes_roundtrip() {
        for src in [
            "-(x^2)",
            "(-x)^2",
            "x/(y*w)",
            "x*y/w",
            "x/y/w",
            "x*(y/w)",
            "x - (y - w)",
            "x - (-2)*y",
            "(x+1)^(y)",
            "2^x",
            "abs(x)^(-1/2)*sign(x)",
            "1.5e-3*x - 2.5e0",
            "-(1/3)",
            "(-3)*x + 0.25",
            "sqrt(2)/2",
        ] {
            roundtrip(src);
        }
    }
}
