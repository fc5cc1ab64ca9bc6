//! Probabilistic identity testing by evaluation at random points.
//!
//! Points are drawn from a seeded ChaCha stream inside a box around a base
//! point; the base point itself is always the first sample. A point where
//! some expression is singular is replaced by a fresh draw, up to a budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Expr, Tape};

/// Sampling parameters for identity and non-vanishing tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplePlan {
    pub samples: usize,
    /// Half-width of the sampling box in every coordinate.
    pub half_width: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_resamples: usize,
    pub seed: u64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            samples: 64,
            half_width: 0.5,
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_resamples: 256,
            seed: 42,
        }
    }
}

impl SamplePlan {
    /// Endless deterministic point stream: the base point, then uniform draws.
    pub fn points<'a>(&self, base: &'a [f64]) -> impl Iterator<Item = Vec<f64>> + 'a {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let h = self.half_width;
        std::iter::once(base.to_vec()).chain(std::iter::repeat_with(move || {
            base.iter()
                .map(|&b| {
                    if h > 0.0 {
                        rng.gen_range(b - h..=b + h)
                    } else {
                        b
                    }
                })
                .collect()
        }))
    }

    pub fn tolerance(&self, scale: f64) -> f64 {
        self.abs_tol + self.rel_tol * scale
    }

    /// Evaluates `exprs` on the accepted sample points.
    ///
    /// Returns the accepted `(point, values, scales)` triples and the number of
    /// singular draws that were rejected.
    pub fn evaluate(&self, exprs: &[Expr], base: &[f64]) -> Sampled {
        let tape = Tape::compile(exprs);
        let mut accepted = Vec::with_capacity(self.samples);
        let mut singular = 0;
        for p in self.points(base) {
            if accepted.len() >= self.samples || singular > self.max_resamples {
                break;
            }
            match tape.eval_with_scale(&p) {
                Ok((values, scales)) => accepted.push(Sample {
                    point: p,
                    values,
                    scales,
                }),
                Err(_) => singular += 1,
            }
        }
        Sampled {
            samples: accepted,
            singular,
            requested: self.samples,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub point: Vec<f64>,
    pub values: Vec<f64>,
    pub scales: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Sampled {
    pub samples: Vec<Sample>,
    pub singular: usize,
    pub requested: usize,
}

impl Sampled {
    /// Fewer than half of the requested samples could be evaluated.
    pub fn is_inconclusive(&self) -> bool {
        self.samples.len() * 2 < self.requested.max(1)
    }
}

/// A point together with the offending value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub value: f64,
    /// Index of the offending expression when several were tested together.
    pub component: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ZeroTest {
    Zero { max_residual: f64, samples: usize },
    NonZero(Witness),
    Inconclusive { valid: usize, singular: usize },
}

impl ZeroTest {
    pub fn is_zero(&self) -> bool {
        matches!(self, ZeroTest::Zero { .. })
    }

    pub fn is_nonzero(&self) -> bool {
        matches!(self, ZeroTest::NonZero(_))
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            ZeroTest::NonZero(w) => Some(w),
            _ => None,
        }
    }

    /// Largest residual seen (witness value for failures).
    pub fn residual(&self) -> Option<f64> {
        match self {
            ZeroTest::Zero { max_residual, .. } => Some(*max_residual),
            ZeroTest::NonZero(w) => Some(w.value.abs()),
            ZeroTest::Inconclusive { .. } => None,
        }
    }
}

/// Tests whether every expression in `exprs` vanishes identically near `base`.
pub fn is_identically_zero(exprs: &[Expr], base: &[f64], plan: &SamplePlan) -> ZeroTest {
    if exprs.iter().all(Expr::is_zero) {
        return ZeroTest::Zero {
            max_residual: 0.0,
            samples: 0,
        };
    }
    let sampled = plan.evaluate(exprs, base);
    let mut max_residual: f64 = 0.0;
    for s in &sampled.samples {
        for (k, (&v, &scale)) in s.values.iter().zip(&s.scales).enumerate() {
            if v.abs() > plan.tolerance(scale) {
                return ZeroTest::NonZero(Witness {
                    point: s.point.clone(),
                    value: v,
                    component: k,
                });
            }
            max_residual = max_residual.max(v.abs());
        }
    }
    if sampled.is_inconclusive() {
        return ZeroTest::Inconclusive {
            valid: sampled.samples.len(),
            singular: sampled.singular,
        };
    }
    ZeroTest::Zero {
        max_residual,
        samples: sampled.samples.len(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NonVanishing {
    NonVanishing { min_abs: f64, samples: usize },
    Vanishes(Witness),
    Inconclusive { valid: usize, singular: usize },
}

impl NonVanishing {
    pub fn holds(&self) -> bool {
        matches!(self, NonVanishing::NonVanishing { .. })
    }
}

/// Tests that `e` stays away from zero at every sample near `base`.
pub fn is_nonvanishing(e: &Expr, base: &[f64], plan: &SamplePlan) -> NonVanishing {
    let sampled = plan.evaluate(std::slice::from_ref(e), base);
    let mut min_abs = f64::INFINITY;
    for s in &sampled.samples {
        let v = s.values[0];
        if v.abs() <= plan.tolerance(s.scales[0]) {
            return NonVanishing::Vanishes(Witness {
                point: s.point.clone(),
                value: v,
                component: 0,
            });
        }
        min_abs = min_abs.min(v.abs());
    }
    if sampled.is_inconclusive() {
        return NonVanishing::Inconclusive {
            valid: sampled.samples.len(),
            singular: sampled.singular,
        };
    }
    NonVanishing::NonVanishing {
        min_abs,
        samples: sampled.samples.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    const CHART: [&str; 2] = ["x", "y"];

    fn p(s: &str) -> Expr {
        parse_expr(s, &CHART).unwrap()
    }

    #[test]
    fn trigonometric_identity() {
        let plan = SamplePlan::default();
        let t = is_identically_zero(&[p("sin(x)^2 + cos(x)^2 - 1")], &[0.0, 0.0], &plan);
        assert!(t.is_zero(), "{t:?}");
        let t = is_identically_zero(&[p("sin(x)^2 + cos(y)^2 - 1")], &[0.0, 0.0], &plan);
        assert!(t.is_nonzero());
    }

    #[test]
    fn singular_points_are_redrawn() {
        let plan = SamplePlan::default();
        let t = is_identically_zero(&[p("x/x - 1")], &[0.0, 0.0], &plan);
        assert!(t.is_zero(), "{t:?}");
        let t = is_identically_zero(&[p("ln(x - 10)")], &[0.0, 0.0], &plan);
        assert!(matches!(t, ZeroTest::Inconclusive { valid: 0, .. }));
    }

    #[test]
    fn witness_is_first_failure() {
        let plan = SamplePlan::default();
        let t = is_identically_zero(&[Expr::zero(), p("x + 1")], &[0.0, 0.0], &plan);
        let w = t.witness().unwrap();
        assert_eq!(w.point, vec![0.0, 0.0]);
        assert_eq!(w.component, 1);
        assert_eq!(w.value, 1.0);
    }

    #[test]
    fn nonvanishing() {
        let plan = SamplePlan::default();
        assert!(is_nonvanishing(&p("1 + x^2"), &[0.0, 0.0], &plan).holds());
        assert!(matches!(
            is_nonvanishing(&p("x"), &[0.0, 0.0], &plan),
            NonVanishing::Vanishes(_)
        ));
    }

    #[test]
    fn points_are_deterministic() {
        let plan = SamplePlan::default();
        let a: Vec<_> = plan.points(&[1.0, 2.0]).take(5).collect();
        let b: Vec<_> = plan.points(&[1.0, 2.0]).take(5).collect();
        assert_eq!(a, b);
        assert_eq!(a[0], vec![1.0, 2.0]);
        assert!(a[1..]
            .iter()
            .all(|q| (q[0] - 1.0).abs() <= 0.5 && (q[1] - 2.0).abs() <= 0.5));
    }
}
