//! Immutable symbolic expressions over the variables of a coordinate chart.
//!
//! Nodes are reference counted and hash-consed per thread, so structurally
//! equal subtrees built on one thread share storage. Construction applies a
//! small, domain-preserving set of rewrites: constant folding, removal of
//! neutral elements, flattening of sums and products, and double negation.
//! Zero factors also annihilate products and quotients, which keeps derivative
//! trees from filling up with `0*e` terms.

mod diff;
mod eval;
mod intern;
mod parse;
mod print;
mod sample;
mod scalar;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::ops;
use std::sync::Arc;

pub use diff::{clear_derivative_cache, differentiate, substitute};
pub use eval::{Singular, Tape};
pub use intern::{sharing_enabled, with_sharing};
pub use parse::{parse_expr, parse_expr_with_params, ParseError};
pub use sample::{
    is_identically_zero, is_nonvanishing, NonVanishing, Sample, SamplePlan, Sampled, Witness,
    ZeroTest,
};
pub use scalar::Scalar;

/// Elementary functions of one argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Exp,
        Func::Ln,
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Sqrt,
        Func::Abs,
        Func::Sign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// A chart variable: its position in the chart and its name.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarRef {
    pub index: usize,
    pub name: Arc<str>,
}

#[derive(Debug)]
pub enum Kind {
    Const(Scalar),
    Var(VarRef),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Expr, Expr),
    Pow(Expr, Expr),
    Neg(Expr),
    Func(Func, Expr),
}

#[derive(Debug)]
pub struct Node {
    kind: Kind,
    hash: u64,
    /// Bit `i` set when variable `i` occurs below this node.
    vars: u64,
    /// Number of nodes when the DAG is unfolded into a tree (saturating).
    tree_size: u64,
}

/// Handle to an immutable expression node.
#[derive(Clone, Debug)]
pub struct Expr(Arc<Node>);

pub const MAX_VARS: usize = 64;

impl Expr {
    fn build(kind: Kind) -> Expr {
        let mut h = DefaultHasher::new();
        let (vars, tree_size) = match &kind {
            Kind::Const(s) => {
                s.hash_bits().hash(&mut h);
                (0, 1)
            }
            Kind::Var(v) => {
                v.hash(&mut h);
                (1u64 << v.index, 1)
            }
            Kind::Add(xs) | Kind::Mul(xs) => {
                let tag: u8 = if matches!(kind, Kind::Add(_)) { 3 } else { 4 };
                tag.hash(&mut h);
                let mut vars = 0;
                let mut size = 1u64;
                for x in xs {
                    x.0.hash.hash(&mut h);
                    vars |= x.0.vars;
                    size = size.saturating_add(x.0.tree_size);
                }
                (vars, size)
            }
            Kind::Div(a, b) | Kind::Pow(a, b) => {
                let tag: u8 = if matches!(kind, Kind::Div(..)) { 5 } else { 6 };
                tag.hash(&mut h);
                a.0.hash.hash(&mut h);
                b.0.hash.hash(&mut h);
                (
                    a.0.vars | b.0.vars,
                    1u64.saturating_add(a.0.tree_size)
                        .saturating_add(b.0.tree_size),
                )
            }
            Kind::Neg(a) => {
                7u8.hash(&mut h);
                a.0.hash.hash(&mut h);
                (a.0.vars, a.0.tree_size.saturating_add(1))
            }
            Kind::Func(f, a) => {
                8u8.hash(&mut h);
                f.hash(&mut h);
                a.0.hash.hash(&mut h);
                (a.0.vars, a.0.tree_size.saturating_add(1))
            }
        };
        Expr(intern::intern(Node {
            kind,
            hash: h.finish(),
            vars,
            tree_size,
        }))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub(crate) fn addr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Structural hash; equal trees hash equally whether or not they share storage.
    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    /// Tree size of the unfolded expression, saturating at `u64::MAX`.
    pub fn tree_size(&self) -> u64 {
        self.0.tree_size
    }

    /// Number of distinct nodes reachable from this root.
    pub fn dag_size(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.addr()) {
                continue;
            }
            stack.extend(e.children().cloned());
        }
        seen.len()
    }

    pub fn children(&self) -> impl Iterator<Item = &Expr> {
        let slice: Vec<&Expr> = match self.kind() {
            Kind::Const(_) | Kind::Var(_) => Vec::new(),
            Kind::Add(xs) | Kind::Mul(xs) => xs.iter().collect(),
            Kind::Div(a, b) | Kind::Pow(a, b) => vec![a, b],
            Kind::Neg(a) | Kind::Func(_, a) => vec![a],
        };
        slice.into_iter()
    }

    pub fn depends_on(&self, index: usize) -> bool {
        index < MAX_VARS && self.0.vars & (1u64 << index) != 0
    }

    pub fn is_constant(&self) -> bool {
        self.0.vars == 0
    }

    pub fn as_const(&self) -> Option<Scalar> {
        match self.kind() {
            Kind::Const(s) => Some(*s),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(Scalar::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(Scalar::is_one)
    }

    // ---- leaves ----

    pub fn constant(s: impl Into<Scalar>) -> Expr {
        Expr::build(Kind::Const(s.into()))
    }

    pub fn int(v: i64) -> Expr {
        Expr::constant(Scalar::int(v))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::constant(Scalar::ratio(num, den))
    }

    pub fn real(v: f64) -> Expr {
        assert!(v.is_finite(), "non-finite constant");
        Expr::constant(Scalar::real(v))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(index: usize, name: &str) -> Expr {
        assert!(
            index < MAX_VARS,
            "charts are limited to {MAX_VARS} variables"
        );
        Expr::build(Kind::Var(VarRef {
            index,
            name: Arc::from(name),
        }))
    }

    // ---- simplifying constructors ----

    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Expr {
        let mut flat = Vec::new();
        let mut constant = Scalar::int(0);
        for t in terms {
            match t.kind() {
                Kind::Const(c) => constant = constant.add(*c),
                Kind::Add(xs) => {
                    for x in xs {
                        match x.kind() {
                            Kind::Const(c) => constant = constant.add(*c),
                            _ => flat.push(x.clone()),
                        }
                    }
                }
                _ => flat.push(t),
            }
        }
        if !constant.is_zero() {
            flat.push(Expr::constant(constant));
        }
        match flat.len() {
            0 => Expr::zero(),
            1 => flat.pop().unwrap(),
            _ => Expr::build(Kind::Add(flat)),
        }
    }

    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Expr {
        let mut flat = Vec::new();
        let mut constant = Scalar::int(1);
        for t in factors {
            match t.kind() {
                Kind::Const(c) => constant = constant.mul(*c),
                Kind::Mul(xs) => {
                    for x in xs {
                        match x.kind() {
                            Kind::Const(c) => constant = constant.mul(*c),
                            _ => flat.push(x.clone()),
                        }
                    }
                }
                _ => flat.push(t),
            }
        }
        if constant.is_zero() {
            return Expr::zero();
        }
        if flat.is_empty() {
            return Expr::constant(constant);
        }
        if !constant.is_one() {
            flat.insert(0, Expr::constant(constant));
        }
        if flat.len() == 1 {
            return flat.pop().unwrap();
        }
        Expr::build(Kind::Mul(flat))
    }

    pub fn neg_of(a: Expr) -> Expr {
        match a.kind() {
            Kind::Const(c) => Expr::constant(c.neg()),
            Kind::Neg(inner) => inner.clone(),
            _ => Expr::build(Kind::Neg(a)),
        }
    }

    pub fn quotient(a: Expr, b: Expr) -> Expr {
        if b.is_one() {
            return a;
        }
        if a.is_zero() && !b.is_zero() {
            return Expr::zero();
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if let (Some(_), Some(_)) = (x.as_rational(), y.as_rational()) {
                if let Some(q) = x.div(y) {
                    return Expr::constant(q);
                }
            }
        }
        Expr::build(Kind::Div(a, b))
    }

    pub fn power(base: Expr, exp: Expr) -> Expr {
        if exp.is_zero() {
            return Expr::one();
        }
        if exp.is_one() {
            return base;
        }
        if base.is_one() {
            return Expr::one();
        }
        if let (Some(b), Some(n)) = (base.as_const(), exp.as_const().and_then(Scalar::as_integer)) {
            if let Some(v) = b.powi_exact(n) {
                return Expr::constant(v);
            }
        }
        Expr::build(Kind::Pow(base, exp))
    }

    pub fn apply(func: Func, a: Expr) -> Expr {
        if let Some(c) = a.as_const() {
            if let Some(v) = fold_func(func, c) {
                return Expr::constant(v);
            }
        }
        Expr::build(Kind::Func(func, a))
    }

    // ---- convenience ----

    pub fn pow(&self, exp: &Expr) -> Expr {
        Expr::power(self.clone(), exp.clone())
    }

    pub fn powi(&self, n: i64) -> Expr {
        Expr::power(self.clone(), Expr::int(n))
    }

    pub fn pow_ratio(&self, num: i64, den: i64) -> Expr {
        Expr::power(self.clone(), Expr::ratio(num, den))
    }

    pub fn exp(&self) -> Expr {
        Expr::apply(Func::Exp, self.clone())
    }
    pub fn ln(&self) -> Expr {
        Expr::apply(Func::Ln, self.clone())
    }
    pub fn sin(&self) -> Expr {
        Expr::apply(Func::Sin, self.clone())
    }
    pub fn cos(&self) -> Expr {
        Expr::apply(Func::Cos, self.clone())
    }
    pub fn sinh(&self) -> Expr {
        Expr::apply(Func::Sinh, self.clone())
    }
    pub fn cosh(&self) -> Expr {
        Expr::apply(Func::Cosh, self.clone())
    }
    pub fn sqrt(&self) -> Expr {
        Expr::apply(Func::Sqrt, self.clone())
    }
    pub fn abs(&self) -> Expr {
        Expr::apply(Func::Abs, self.clone())
    }
    pub fn sign(&self) -> Expr {
        Expr::apply(Func::Sign, self.clone())
    }

    /// Evaluate at a point of the chart.
    pub fn eval(&self, point: &[f64]) -> Result<f64, Singular> {
        Tape::compile(std::slice::from_ref(self)).eval_one(point)
    }
}

/// Folds a function at exactly representable points only.
fn fold_func(func: Func, c: Scalar) -> Option<Scalar> {
    let r = c.as_rational()?;
    let zero = c.is_zero();
    match func {
        Func::Exp | Func::Cos | Func::Cosh if zero => Some(Scalar::int(1)),
        Func::Sin | Func::Sinh if zero => Some(Scalar::int(0)),
        Func::Ln if c.is_one() => Some(Scalar::int(0)),
        Func::Abs => Some(if c.is_negative() { c.neg() } else { c }),
        Func::Sign if !zero => Some(Scalar::int(if c.is_negative() { -1 } else { 1 })),
        Func::Sqrt if !c.is_negative() => {
            let n = exact_isqrt(*r.numer())?;
            let d = exact_isqrt(*r.denom())?;
            Some(Scalar::ratio(n, d))
        }
        _ => None,
    }
}

fn exact_isqrt(v: i64) -> Option<i64> {
    if v < 0 {
        return None;
    }
    let s = (v as f64).sqrt().round() as i64;
    (s.checked_mul(s) == Some(v)).then_some(s)
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        if self.ptr_eq(other) {
            return true;
        }
        if self.0.hash != other.0.hash {
            return false;
        }
        match (self.kind(), other.kind()) {
            (Kind::Const(a), Kind::Const(b)) => a == b,
            (Kind::Var(a), Kind::Var(b)) => a == b,
            (Kind::Add(a), Kind::Add(b)) | (Kind::Mul(a), Kind::Mul(b)) => a == b,
            (Kind::Div(a1, b1), Kind::Div(a2, b2)) | (Kind::Pow(a1, b1), Kind::Pow(a2, b2)) => {
                a1 == a2 && b1 == b2
            }
            (Kind::Neg(a), Kind::Neg(b)) => a == b,
            (Kind::Func(f, a), Kind::Func(g, b)) => f == g && a == b,
            _ => false,
        }
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash.hash(state);
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::int(v)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self, rhs.clone())
            }
        }
        impl ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs)
            }
        }
        impl ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(Expr, Expr) -> Expr = $body;
                f(self.clone(), rhs.clone())
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum([a, b]));
binop!(Sub, sub, |a, b| Expr::sum([a, Expr::neg_of(b)]));
binop!(Mul, mul, |a, b| Expr::product([a, b]));
binop!(Div, div, Expr::quotient);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg_of(self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg_of(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var(0, "x")
    }

    #[test]
    fn neutral_elements_and_folding() {
        assert_eq!(x() + Expr::zero(), x());
        assert_eq!(Expr::one() * x(), x());
        assert_eq!(x().powi(0), Expr::one());
        assert_eq!(x().powi(1), x());
        assert_eq!(-(-x()), x());
        assert_eq!(Expr::int(2) + Expr::int(3), Expr::int(5));
        assert_eq!(Expr::int(1) / Expr::int(3), Expr::ratio(1, 3));
        assert_eq!(Expr::int(4).sqrt(), Expr::int(2));
        assert!(matches!(
            Expr::int(3).sqrt().kind(),
            Kind::Func(Func::Sqrt, _)
        ));
    }

    #[test]
    fn no_cancellation_of_quotients() {
        let q = x() / x();
        assert!(matches!(q.kind(), Kind::Div(..)));
        let d = x() - x();
        assert!(matches!(d.kind(), Kind::Add(_)));
    }

    #[test]
    fn hash_consing_shares_equal_subtrees() {
        let a = (x() + Expr::int(1)).sin();
        let b = (x() + Expr::int(1)).sin();
        assert!(a.ptr_eq(&b));
        let c = with_sharing(false, || (x() + Expr::int(1)).sin());
        assert!(!a.ptr_eq(&c));
        assert_eq!(a, c);
    }

    #[test]
    fn tree_and_dag_sizes() {
        let s = x().sin();
        let e = &s * &s;
        assert_eq!(e.tree_size(), 5);
        assert_eq!(e.dag_size(), 3);
    }
}
