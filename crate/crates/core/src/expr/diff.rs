//! Symbolic differentiation and substitution.
//!
//! Derivatives are memoized per thread by node address, so repeated Lie
//! derivatives of shared subtrees do not re-expand them. The cache keeps its
//! keys alive, which keeps the addresses valid.

use std::cell::RefCell;
use std::collections::HashMap;

use super::{Expr, Func, Kind};

const CACHE_LIMIT: usize = 1 << 20;

thread_local! {
    static CACHE: RefCell<HashMap<(usize, usize), (Expr, Expr)>> = RefCell::new(HashMap::new());
}

/// Drops the per-thread derivative cache.
pub fn clear_derivative_cache() {
    CACHE.with(|c| c.borrow_mut().clear());
}

/// ∂e/∂x_var.
pub fn differentiate(e: &Expr, var: usize) -> Expr {
    if !e.depends_on(var) {
        return Expr::zero();
    }
    if let Kind::Var(_) = e.kind() {
        return Expr::one();
    }
    let key = (e.addr(), var);
    if let Some(d) = CACHE.with(|c| c.borrow().get(&key).map(|(_, d)| d.clone())) {
        return d;
    }
    let d = derive(e, var);
    CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() >= CACHE_LIMIT {
            c.clear();
        }
        c.insert(key, (e.clone(), d.clone()));
    });
    d
}

fn derive(e: &Expr, var: usize) -> Expr {
    let d = |x: &Expr| differentiate(x, var);
    match e.kind() {
        Kind::Const(_) | Kind::Var(_) => unreachable!("handled by differentiate"),
        Kind::Add(xs) => Expr::sum(xs.iter().map(d)),
        Kind::Mul(xs) => Expr::sum((0..xs.len()).filter(|&i| xs[i].depends_on(var)).map(|i| {
            let others = xs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, x)| x.clone());
            Expr::product(std::iter::once(d(&xs[i])).chain(others))
        })),
        // (a/b)' = (a' - (a/b) b') / b
        Kind::Div(a, b) => (d(a) - e * d(b)) / b,
        Kind::Pow(u, v) => {
            if v.is_constant() {
                v * u.pow(&(v - Expr::one())) * d(u)
            } else if u.is_constant() {
                e * d(v) * u.ln()
            } else {
                e * (d(v) * u.ln() + v * d(u) / u)
            }
        }
        Kind::Neg(a) => -d(a),
        Kind::Func(f, u) => {
            let du = d(u);
            let outer = match f {
                Func::Exp => e.clone(),
                Func::Ln => return du / u,
                Func::Sin => u.cos(),
                Func::Cos => -u.sin(),
                Func::Sinh => u.cosh(),
                Func::Cosh => u.sinh(),
                Func::Sqrt => return du / (Expr::int(2) * e),
                Func::Abs => u.sign(),
                Func::Sign => return Expr::zero(),
            };
            outer * du
        }
    }
}

/// Replaces variables by expressions, `subs[i]` standing for variable `i`
/// (`None` leaves the variable untouched).
pub fn substitute(e: &Expr, subs: &[Option<Expr>]) -> Expr {
    let mut memo = HashMap::new();
    subst(e, subs, &mut memo)
}

fn subst(e: &Expr, subs: &[Option<Expr>], memo: &mut HashMap<usize, Expr>) -> Expr {
    let touched = subs
        .iter()
        .enumerate()
        .any(|(i, s)| s.is_some() && e.depends_on(i));
    if !touched {
        return e.clone();
    }
    if let Some(r) = memo.get(&e.addr()) {
        return r.clone();
    }
    let mut s = |x: &Expr| subst(x, subs, memo);
    let r = match e.kind() {
        Kind::Const(_) => e.clone(),
        Kind::Var(v) => subs
            .get(v.index)
            .cloned()
            .flatten()
            .unwrap_or_else(|| e.clone()),
        Kind::Add(xs) => Expr::sum(xs.iter().map(&mut s).collect::<Vec<_>>()),
        Kind::Mul(xs) => Expr::product(xs.iter().map(&mut s).collect::<Vec<_>>()),
        Kind::Div(a, b) => {
            let a = s(a);
            Expr::quotient(a, s(b))
        }
        Kind::Pow(a, b) => {
            let a = s(a);
            Expr::power(a, s(b))
        }
        Kind::Neg(a) => -s(a),
        Kind::Func(f, a) => Expr::apply(*f, s(a)),
    };
    memo.insert(e.addr(), r.clone());
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    const CHART: [&str; 3] = ["x", "y", "w"];

    fn p(s: &str) -> Expr {
        parse_expr(s, &CHART).unwrap()
    }

    fn central_difference(e: &Expr, var: usize, at: &[f64], h: f64) -> f64 {
        let mut plus = at.to_vec();
        let mut minus = at.to_vec();
        plus[var] += h;
        minus[var] -= h;
        (e.eval(&plus).unwrap() - e.eval(&minus).unwrap()) / (2.0 * h)
    }

    #[test]
    fn exact_rules() {
        assert_eq!(differentiate(&p("exp(2*w)"), 2), p("exp(2*w)*2"));
        assert!(differentiate(&p("x*y"), 2).is_zero());
        assert!(differentiate(&p("sign(x)"), 0).is_zero());
    }

    #[test]
    fn matches_finite_differences() {
        let at = [0.3, -0.7, 0.4];
        for src in [
            "x^3*sin(y) + exp(x*w)",
            "ln(x + 2)/(1 + y^2)",
            "sqrt(x^2 + y^2 + 1)*cosh(w)",
            "abs(y)^(-1/2)*sign(y)",
            "(x + 2)^(w + 1)",
            "2^x*sinh(y*w)",
            "-(x/y)/(w + 3)",
        ] {
            let e = p(src);
            for var in 0..3 {
                let exact = differentiate(&e, var).eval(&at).unwrap();
                let approx = central_difference(&e, var, &at, 1e-5);
                assert!(
                    (exact - approx).abs() <= 1e-6 * (1.0 + exact.abs()),
                    "{src} d/d{var}: {exact} vs {approx}"
                );
            }
        }
    }

    #[test]
    fn substitution() {
        let e = p("x*exp(w)");
        let r = substitute(&e, &[Some(p("y + 1")), None, Some(Expr::zero())]);
        assert_eq!(r, p("y + 1"));
    }
}
