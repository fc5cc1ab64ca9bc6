//! Seeded random polynomial systems, feedback pairs and vector fields.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::check::Verdict;
use crate::expr::{is_nonvanishing, Expr, SamplePlan};
use crate::feedback::FeedbackTransform;
use crate::geometry::{Chart, VectorField};
use crate::invariants::canonicalize;
use crate::structure::{check_assumptions, ControlSystem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn coefficient(rng: &mut ChaCha8Rng) -> Expr {
    let num = loop {
        let n = rng.gen_range(-4i64..=4);
        if n != 0 {
            break n;
        }
    };
    Expr::ratio(num, rng.gen_range(1i64..=4))
}

/// `c · Π x_j^{e_j}`.
fn monomial(coeff: Expr, vars: &[Expr], exps: &[u32]) -> Expr {
    Expr::product(
        std::iter::once(coeff).chain(
            vars.iter()
                .zip(exps)
                .filter(|(_, e)| **e > 0)
                .map(|(v, e)| v.powi(*e as i64)),
        ),
    )
}

/// A polynomial with `terms` random monomials of total degree ≤ `degree`.
pub fn polynomial(rng: &mut ChaCha8Rng, vars: &[Expr], degree: u32, terms: usize) -> Expr {
    Expr::sum((0..terms).map(|_| {
        let mut exps = vec![0u32; vars.len()];
        let total = rng.gen_range(0..=degree);
        for _ in 0..total {
            exps[rng.gen_range(0..vars.len())] += 1;
        }
        monomial(coefficient(rng), vars, &exps)
    }))
}

pub fn xyw_chart() -> Chart {
    Chart::new(["x", "y", "w"])
}

fn vars(chart: &Chart) -> Vec<Expr> {
    (0..chart.dim()).map(|i| chart.var(i)).collect()
}

/// Quadratic drift and affine control field, with `w` and `w²` terms in the
/// drift so that the assumptions typically hold.
fn candidate_system(rng: &mut ChaCha8Rng) -> ControlSystem {
    let chart = xyw_chart();
    let v = vars(&chart);
    let w = &v[2];
    let f = VectorField::new([
        Expr::one() + coefficient(rng) * w + polynomial(rng, &v, 2, 2),
        coefficient(rng) * w.powi(2) + polynomial(rng, &v, 2, 2),
        polynomial(rng, &v, 2, 2),
    ]);
    let small = |rng: &mut ChaCha8Rng| Expr::ratio(1, 4) * polynomial(rng, &v, 1, 1);
    let g = VectorField::new([small(rng), small(rng), Expr::one() + small(rng)]);
    let base = (0..3)
        .map(|_| rng.gen_range(-2i32..=2) as f64 / 10.0)
        .collect();
    ControlSystem::new(chart, f, vec![g], base)
}

/// A random polynomial system satisfying both assumptions and admitting a
/// canonical pair on its sampling box.
pub fn random_system(rng: &mut ChaCha8Rng, plan: &SamplePlan) -> ControlSystem {
    loop {
        let sys = candidate_system(rng);
        let ok = check_assumptions(&sys, plan)
            .map(|a| a.verdict() == Verdict::Yes)
            .unwrap_or(false);
        if ok && canonicalize(&sys, plan).is_ok() {
            return sys;
        }
    }
}

/// `α` quadratic, `β = c + small quadratic` bounded away from zero on the box.
pub fn random_feedback(
    rng: &mut ChaCha8Rng,
    sys: &ControlSystem,
    plan: &SamplePlan,
) -> FeedbackTransform {
    let v = vars(&sys.chart);
    loop {
        let alpha = polynomial(rng, &v, 2, 3);
        let c = [-2i64, -1, 1, 2][rng.gen_range(0..4)];
        let beta = Expr::int(c) + Expr::ratio(1, 8) * polynomial(rng, &v, 2, 2);
        if let crate::expr::NonVanishing::NonVanishing { min_abs, .. } =
            is_nonvanishing(&beta, &sys.base, plan)
        {
            if min_abs > 0.25 {
                return FeedbackTransform::new(alpha, beta);
            }
        }
    }
}

/// A polynomial vector field on the chart.
pub fn random_field(rng: &mut ChaCha8Rng, chart: &Chart, degree: u32) -> VectorField {
    let v = vars(chart);
    VectorField::new((0..chart.dim()).map(|_| polynomial(rng, &v, degree, 3)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_valid() {
        let plan = SamplePlan::default();
        let a = random_system(&mut rng(7), &plan);
        let b = random_system(&mut rng(7), &plan);
        assert_eq!(a.f, b.f);
        assert_eq!(a.g, b.g);
        let t = random_feedback(&mut rng(3), &a, &plan);
        assert!(is_nonvanishing(&t.beta, &a.base, &plan).holds());
    }
}
