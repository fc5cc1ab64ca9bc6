//! Numerical evaluation through a flattened instruction tape.
//!
//! A tape evaluates each distinct node once per point and also records, for
//! every root, the largest magnitude of any subexpression. That magnitude is
//! the natural scale for deciding whether a computed residual is rounding
//! noise.

use std::collections::HashMap;
use std::fmt;

use super::{Expr, Func, Kind};

/// Why an expression has no finite value at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Singular {
    DivisionByZero,
    LogDomain,
    SqrtDomain,
    SignAtZero,
    PowerDomain,
    NonFinite,
}

impl fmt::Display for Singular {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Singular::DivisionByZero => "division by zero",
            Singular::LogDomain => "logarithm of a non-positive number",
            Singular::SqrtDomain => "square root of a negative number",
            Singular::SignAtZero => "sign (or abs derivative) at zero",
            Singular::PowerDomain => "power outside its real domain",
            Singular::NonFinite => "non-finite value",
        })
    }
}

impl std::error::Error for Singular {}

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Var(usize),
    Add(Vec<usize>),
    Mul(Vec<usize>),
    Div(usize, usize),
    Pow(usize, usize),
    PowInt(usize, i32),
    Neg(usize),
    Func(Func, usize),
}

/// Compiled form of a set of expressions sharing one instruction list.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    roots: Vec<usize>,
}

impl Tape {
    pub fn compile(roots: &[Expr]) -> Tape {
        let mut slots: HashMap<usize, usize> = HashMap::new();
        let mut ops = Vec::new();
        let mut out = Vec::with_capacity(roots.len());
        for r in roots {
            out.push(emit(r, &mut slots, &mut ops));
        }
        Tape { ops, roots: out }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn roots(&self) -> usize {
        self.roots.len()
    }

    pub fn eval_one(&self, point: &[f64]) -> Result<f64, Singular> {
        let mut vals = vec![0.0; self.ops.len()];
        self.run(point, &mut vals, None)?;
        Ok(vals[self.roots[0]])
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>, Singular> {
        let mut vals = vec![0.0; self.ops.len()];
        self.run(point, &mut vals, None)?;
        Ok(self.roots.iter().map(|&r| vals[r]).collect())
    }

    /// Values of all roots together with their subexpression scales.
    pub fn eval_with_scale(&self, point: &[f64]) -> Result<(Vec<f64>, Vec<f64>), Singular> {
        let mut vals = vec![0.0; self.ops.len()];
        let mut scale = vec![0.0; self.ops.len()];
        self.run(point, &mut vals, Some(&mut scale))?;
        Ok((
            self.roots.iter().map(|&r| vals[r]).collect(),
            self.roots.iter().map(|&r| scale[r]).collect(),
        ))
    }

    fn run(
        &self,
        point: &[f64],
        vals: &mut [f64],
        mut scale: Option<&mut Vec<f64>>,
    ) -> Result<(), Singular> {
        for (i, op) in self.ops.iter().enumerate() {
            let v = match op {
                Op::Const(c) => *c,
                Op::Var(k) => point[*k],
                Op::Add(xs) => xs.iter().map(|&x| vals[x]).sum(),
                Op::Mul(xs) => xs.iter().map(|&x| vals[x]).product(),
                Op::Div(a, b) => {
                    if vals[*b] == 0.0 {
                        return Err(Singular::DivisionByZero);
                    }
                    vals[*a] / vals[*b]
                }
                Op::PowInt(a, n) => {
                    if vals[*a] == 0.0 && *n < 0 {
                        return Err(Singular::DivisionByZero);
                    }
                    vals[*a].powi(*n)
                }
                Op::Pow(a, b) => {
                    let (x, y) = (vals[*a], vals[*b]);
                    if x < 0.0 && y.fract() != 0.0 {
                        return Err(Singular::PowerDomain);
                    }
                    if x == 0.0 && y < 0.0 {
                        return Err(Singular::DivisionByZero);
                    }
                    x.powf(y)
                }
                Op::Neg(a) => -vals[*a],
                Op::Func(f, a) => apply(*f, vals[*a])?,
            };
            if !v.is_finite() {
                return Err(Singular::NonFinite);
            }
            vals[i] = v;
            if let Some(scale) = scale.as_deref_mut() {
                let mut s = v.abs();
                match op {
                    Op::Add(xs) | Op::Mul(xs) => {
                        for &x in xs {
                            s = s.max(scale[x]);
                        }
                    }
                    Op::Div(a, b) | Op::Pow(a, b) => s = s.max(scale[*a]).max(scale[*b]),
                    Op::PowInt(a, _) | Op::Neg(a) | Op::Func(_, a) => s = s.max(scale[*a]),
                    Op::Const(_) | Op::Var(_) => {}
                }
                scale[i] = s;
            }
        }
        Ok(())
    }
}

fn apply(f: Func, x: f64) -> Result<f64, Singular> {
    Ok(match f {
        Func::Exp => x.exp(),
        Func::Ln => {
            if x <= 0.0 {
                return Err(Singular::LogDomain);
            }
            x.ln()
        }
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Sinh => x.sinh(),
        Func::Cosh => x.cosh(),
        Func::Sqrt => {
            if x < 0.0 {
                return Err(Singular::SqrtDomain);
            }
            x.sqrt()
        }
        Func::Abs => x.abs(),
        Func::Sign => {
            if x == 0.0 {
                return Err(Singular::SignAtZero);
            }
            x.signum()
        }
    })
}

/// Post-order emission without recursion, so deep trees cannot overflow the stack.
fn emit(root: &Expr, slots: &mut HashMap<usize, usize>, ops: &mut Vec<Op>) -> usize {
    let mut stack: Vec<(Expr, bool)> = vec![(root.clone(), false)];
    while let Some((e, expanded)) = stack.pop() {
        if slots.contains_key(&e.addr()) {
            continue;
        }
        if !expanded {
            stack.push((e.clone(), true));
            for c in e.children() {
                if !slots.contains_key(&c.addr()) {
                    stack.push((c.clone(), false));
                }
            }
            continue;
        }
        let at = |x: &Expr| slots[&x.addr()];
        let op = match e.kind() {
            Kind::Const(c) => Op::Const(c.to_f64()),
            Kind::Var(v) => Op::Var(v.index),
            Kind::Add(xs) => Op::Add(xs.iter().map(at).collect()),
            Kind::Mul(xs) => Op::Mul(xs.iter().map(at).collect()),
            Kind::Div(a, b) => Op::Div(at(a), at(b)),
            Kind::Pow(a, b) => match b.as_const().and_then(|c| c.as_integer()) {
                Some(n) if n.unsigned_abs() <= 64 => Op::PowInt(at(a), n as i32),
                _ => Op::Pow(at(a), at(b)),
            },
            Kind::Neg(a) => Op::Neg(at(a)),
            Kind::Func(f, a) => Op::Func(*f, at(a)),
        };
        slots.insert(e.addr(), ops.len());
        ops.push(op);
    }
    slots[&root.addr()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    #[test]
    fn singularities_are_reported() {
        let chart = ["x"];
        let cases = [
            ("1/x", Singular::DivisionByZero),
            ("ln(x)", Singular::LogDomain),
            ("sqrt(x - 1)", Singular::SqrtDomain),
            ("sign(x)", Singular::SignAtZero),
            ("(x - 1)^(1/2)", Singular::PowerDomain),
            ("x^(-1/2)", Singular::DivisionByZero),
        ];
        for (src, kind) in cases {
            let e = parse_expr(src, &chart).unwrap();
            assert_eq!(e.eval(&[0.0]), Err(kind), "{src}");
        }
        let e = parse_expr("exp(exp(x))", &chart).unwrap();
        assert_eq!(e.eval(&[10.0]), Err(Singular::NonFinite));
    }

    #[test]
    fn scale_tracks_largest_subexpression() {
        let e = parse_expr("(x + 200)/2 - x/2", &["x"]).unwrap();
        let tape = Tape::compile(&[e]);
        let (v, s) = tape.eval_with_scale(&[1.0]).unwrap();
        assert!((v[0] - 100.0).abs() < 1e-12);
        assert!((s[0] - 201.0).abs() < 1e-12);
    }

    #[test]
    fn shared_nodes_are_emitted_once() {
        let x = Expr::var(0, "x");
        let s = x.sin();
        let e = &s * &s + &s;
        assert_eq!(Tape::compile(&[e]).len(), 4);
    }
}
