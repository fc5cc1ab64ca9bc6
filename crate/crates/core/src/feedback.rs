//! Feedback transformations `f ↦ f + gα`, `g ↦ gβ` and changes of coordinates,
//! together with the closed-form prediction of the transformed structure
//! functions.

use thiserror::Error;

use crate::expr::{
    differentiate, is_identically_zero, is_nonvanishing, substitute, Expr, NonVanishing,
    SamplePlan, Tape, Witness, ZeroTest,
};
use crate::geometry::{Chart, VectorField};
use crate::structure::{Brackets, ControlSystem, StructureError, StructureFunctions};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum FeedbackError {
    #[error("beta vanishes at {:?}", .0.point)]
    BetaVanishes(Witness),
    #[error("beta could not be shown to be non-vanishing on the sampling box")]
    BetaInconclusive,
    #[error("diffeomorphism needs {expected} component expressions, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("supplied inverse is not an inverse: residual {} at {:?}", .0.value, .0.point)]
    NotInverse(Witness),
    #[error("diffeomorphism could not be evaluated at the base point")]
    SingularBase,
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// A scalar feedback `u = α + β ũ`.
#[derive(Clone, Debug)]
pub struct FeedbackTransform {
    pub alpha: Expr,
    pub beta: Expr,
}

impl FeedbackTransform {
    pub fn new(alpha: Expr, beta: Expr) -> FeedbackTransform {
        FeedbackTransform { alpha, beta }
    }

    pub fn identity() -> FeedbackTransform {
        FeedbackTransform::new(Expr::zero(), Expr::one())
    }

    /// γ = L_f β + α L_g β − β L_g α.
    pub fn gamma(&self, f: &VectorField, g: &VectorField) -> Expr {
        f.apply(&self.beta) + &self.alpha * g.apply(&self.beta) - &self.beta * g.apply(&self.alpha)
    }

    /// Applying `self` and then `then` equals applying the returned transform.
    pub fn compose(&self, then: &FeedbackTransform) -> FeedbackTransform {
        FeedbackTransform::new(
            &self.alpha + &self.beta * &then.alpha,
            &self.beta * &then.beta,
        )
    }
}

/// `(f + gα, βg)` with β checked to be non-vanishing on the box.
pub fn apply_feedback(
    sys: &ControlSystem,
    t: &FeedbackTransform,
    plan: &SamplePlan,
) -> Result<ControlSystem, FeedbackError> {
    let g = sys.single_input()?;
    match is_nonvanishing(&t.beta, &sys.base, plan) {
        NonVanishing::NonVanishing { .. } => {}
        NonVanishing::Vanishes(w) => return Err(FeedbackError::BetaVanishes(w)),
        NonVanishing::Inconclusive { .. } => return Err(FeedbackError::BetaInconclusive),
    }
    Ok(apply_feedback_unchecked(sys.f.clone(), g, t, sys))
}

fn apply_feedback_unchecked(
    f: VectorField,
    g: &VectorField,
    t: &FeedbackTransform,
    sys: &ControlSystem,
) -> ControlSystem {
    let f_new = &f + &g.scale(&t.alpha);
    sys.with_fields(f_new, g.scale(&t.beta))
}

/// Transformed structure functions assembled in closed form (ln|β| throughout).
pub fn predict_transformed_structure(
    sf: &StructureFunctions,
    t: &FeedbackTransform,
    sys: &ControlSystem,
) -> Result<StructureFunctions, FeedbackError> {
    let g = sys.single_input()?;
    let f = &sys.f;
    let gf = Brackets::of(f, g).gf;
    let [k1, k2, k3] = &sf.k;
    let [l1, l2, l3] = &sf.lambda;
    let (a, b) = (&t.alpha, &t.beta);
    let gamma = t.gamma(f, g);
    let lg_b = g.apply(b);
    let lg_a = g.apply(a);
    let lg_lnb = &lg_b / b;
    let lf_lnb = f.apply(b) / b;
    let lgf_b = gf.apply(b);
    let lg_gamma = g.apply(&gamma);

    let k3t = (k3 - a) / b;
    let k2t = k2 - lf_lnb - &gamma / b - a * &lg_lnb - &k3t * &lg_b;
    let k1t = k1
        + gf.apply(a)
        + (f.apply(&gamma) + a * &lg_gamma - &gamma * &lg_a) / b
        + &k2t * &gamma / b
        + &k3t * (&lgf_b + &lg_gamma - &gamma * &lg_lnb);
    let l1t = b.powi(2) * l1;
    let l2t =
        b * l2 - b * l1 * a + &gamma * l3 - &lgf_b - &lg_gamma + Expr::int(2) * &gamma * &lg_lnb;
    let l3t = b * l3 + lg_b;
    Ok(StructureFunctions {
        k: [k1t, k2t, k3t],
        lambda: [l1t, l2t, l3t],
    })
}

/// A change of coordinates with a user-supplied inverse, both written in the
/// same chart variables.
#[derive(Clone, Debug)]
pub struct Diffeomorphism {
    pub forward: Vec<Expr>,
    pub inverse: Vec<Expr>,
}

impl Diffeomorphism {
    pub fn new(forward: Vec<Expr>, inverse: Vec<Expr>) -> Diffeomorphism {
        Diffeomorphism { forward, inverse }
    }

    pub fn inverted(&self) -> Diffeomorphism {
        Diffeomorphism {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    fn compose(outer: &[Expr], inner: &[Expr]) -> Vec<Expr> {
        let subs: Vec<Option<Expr>> = inner.iter().cloned().map(Some).collect();
        outer.iter().map(|e| substitute(e, &subs)).collect()
    }

    pub fn image_of(&self, point: &[f64]) -> Result<Vec<f64>, FeedbackError> {
        Tape::compile(&self.forward)
            .eval(point)
            .map_err(|_| FeedbackError::SingularBase)
    }

    /// Checks inverse∘forward = id near `base` and forward∘inverse = id near its image.
    pub fn verify(
        &self,
        chart: &Chart,
        base: &[f64],
        plan: &SamplePlan,
    ) -> Result<(), FeedbackError> {
        let n = chart.dim();
        for m in [&self.forward, &self.inverse] {
            if m.len() != n {
                return Err(FeedbackError::Shape {
                    expected: n,
                    got: m.len(),
                });
            }
        }
        let image = self.image_of(base)?;
        let ids = |maps: Vec<Expr>| -> Vec<Expr> {
            maps.into_iter()
                .enumerate()
                .map(|(i, e)| e - chart.var(i))
                .collect()
        };
        let left = ids(Self::compose(&self.inverse, &self.forward));
        let right = ids(Self::compose(&self.forward, &self.inverse));
        for (residual, at) in [(left, base), (right, image.as_slice())] {
            if let ZeroTest::NonZero(w) = is_identically_zero(&residual, at, plan) {
                return Err(FeedbackError::NotInverse(w));
            }
        }
        Ok(())
    }
}

/// `φ_* f = (Dφ · f) ∘ φ⁻¹` for every field; the base point moves to φ(ξ0).
pub fn pushforward(
    sys: &ControlSystem,
    d: &Diffeomorphism,
    plan: &SamplePlan,
) -> Result<ControlSystem, FeedbackError> {
    d.verify(&sys.chart, &sys.base, plan)?;
    let n = sys.dim();
    let jac: Vec<Vec<Expr>> = d
        .forward
        .iter()
        .map(|phi| (0..n).map(|j| differentiate(phi, j)).collect())
        .collect();
    let inv: Vec<Option<Expr>> = d.inverse.iter().cloned().map(Some).collect();
    let push = |v: &VectorField| {
        VectorField::new(jac.iter().map(|row| {
            let comp = Expr::sum(
                row.iter()
                    .zip(v.components())
                    .filter(|(a, b)| !a.is_zero() && !b.is_zero())
                    .map(|(a, b)| a * b),
            );
            substitute(&comp, &inv)
        }))
    };
    Ok(ControlSystem {
        chart: sys.chart.clone(),
        f: push(&sys.f),
        g: sys.g.iter().map(push).collect(),
        base: d.image_of(&sys.base)?,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::structure::compute_structure_functions;
    use crate::structure::tests::system;

    #[test]
    fn scaling_lambda1() {
        let sys = system(["cos(w)", "sin(w)", "0"], ["0", "0", "1"], [0.0; 3]);
        let plan = SamplePlan::default();
        let sf = compute_structure_functions(&sys, &plan).unwrap();
        let t = FeedbackTransform::new(Expr::zero(), Expr::int(2));
        let p = predict_transformed_structure(&sf, &t, &sys).unwrap();
        assert!((p.lambda[0].eval(&[0.1, 0.2, 0.3]).unwrap() + 4.0).abs() < 1e-12);
        let recomputed =
            compute_structure_functions(&apply_feedback(&sys, &t, &plan).unwrap(), &plan).unwrap();
        assert!((recomputed.lambda[0].eval(&[0.1, 0.2, 0.3]).unwrap() + 4.0).abs() < 1e-12);
    }

    #[test]
    fn prediction_matches_recomputation() {
        let sys = system(
            ["1 + y*w", "x + w^2", "y/3"],
            ["0", "x/5", "1 + x*y/4"],
            [0.1, 0.2, 0.0],
        );
        let plan = SamplePlan::default();
        let sf = compute_structure_functions(&sys, &plan).unwrap();
        let chart = &sys.chart;
        let t = FeedbackTransform::new(
            chart.parse("x*w - y", &BTreeMap::new()).unwrap(),
            chart.parse("-(1 + w*x/5)", &BTreeMap::new()).unwrap(),
        );
        let predicted = predict_transformed_structure(&sf, &t, &sys).unwrap();
        let transformed = apply_feedback(&sys, &t, &plan).unwrap();
        let recomputed = compute_structure_functions(&transformed, &plan).unwrap();
        for (i, (p, r)) in predicted.all().iter().zip(recomputed.all()).enumerate() {
            let t = is_identically_zero(&[*p - r], &sys.base, &plan);
            assert!(t.is_zero(), "{}: {t:?}", StructureFunctions::NAMES[i]);
        }
    }

    #[test]
    fn identity_feedback_and_beta_zero() {
        let sys = system(["cos(w)", "sin(w)", "0"], ["0", "0", "1"], [0.0; 3]);
        let plan = SamplePlan::default();
        let same = apply_feedback(&sys, &FeedbackTransform::identity(), &plan).unwrap();
        assert_eq!(same.f, sys.f);
        assert_eq!(same.g, sys.g);
        let bad = FeedbackTransform::new(Expr::zero(), Expr::var(0, "x"));
        assert!(matches!(
            apply_feedback(&sys, &bad, &plan),
            Err(FeedbackError::BetaVanishes(_))
        ));
    }

    #[test]
    fn pushforward_round_trip() {
        let sys = system(["cos(w)", "sin(w)", "0"], ["0", "0", "1"], [0.0; 3]);
        let plan = SamplePlan::default();
        let c = &sys.chart;
        let p = |s: &str| c.parse(s, &BTreeMap::new()).unwrap();
        let d = Diffeomorphism::new(
            vec![p("x + w^2"), p("y"), p("w + y/2")],
            vec![p("x - (w - y/2)^2"), p("y"), p("w - y/2")],
        );
        let pushed = pushforward(&sys, &d, &plan).unwrap();
        let back = pushforward(&pushed, &d.inverted(), &plan).unwrap();
        let diff: Vec<Expr> = (0..3)
            .flat_map(|i| {
                [
                    sys.f.component(i) - back.f.component(i),
                    sys.g[0].component(i) - back.g[0].component(i),
                ]
            })
            .collect();
        assert!(is_identically_zero(&diff, &sys.base, &plan).is_zero());
        let wrong = Diffeomorphism::new(d.forward.clone(), d.forward.clone());
        assert!(matches!(
            pushforward(&sys, &wrong, &plan),
            Err(FeedbackError::NotInverse(_))
        ));
    }
}
