//! Structure functions of a three-dimensional single-input system.
//!
//! Under the two non-degeneracy assumptions
//!
//! * A1: `f ∧ g ∧ [g,f] ≠ 0`
//! * A2: `g ∧ [g,f] ∧ [g,[g,f]] ≠ 0`
//!
//! the iterated brackets decompose uniquely as
//!
//! ```text
//! [f,[f,g]] = k1 g + k2 [g,f] + k3 [g,[g,f]]
//! [g,[g,f]] = λ1 f + λ2 g + λ3 [g,f]
//! ```

use serde::Serialize;
use thiserror::Error;

use crate::check::{Check, Verdict};
use crate::expr::{is_identically_zero, is_nonvanishing, Expr, SamplePlan};
use crate::geometry::{decompose_in_frame, lie_bracket, Chart, Frame, FrameError, VectorField};

/// `ξ̇ = f(ξ) + Σ g_i(ξ) u_i` on a chart, with a base point.
#[derive(Clone, Debug)]
pub struct ControlSystem {
    pub chart: Chart,
    pub f: VectorField,
    pub g: Vec<VectorField>,
    pub base: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum StructureError {
    #[error("expected a 3-dimensional single-input system, got n = {n}, m = {m}")]
    Shape { n: usize, m: usize },
    #[error("assumption {name} fails: {detail}")]
    Assumption { name: &'static str, detail: String },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

impl ControlSystem {
    pub fn new(chart: Chart, f: VectorField, g: Vec<VectorField>, base: Vec<f64>) -> ControlSystem {
        let n = chart.dim();
        assert!(
            !g.is_empty(),
            "a control system needs at least one control field"
        );
        assert!(
            f.dim() == n && g.iter().all(|gi| gi.dim() == n),
            "fields must live on the chart"
        );
        assert_eq!(base.len(), n, "base point dimension");
        ControlSystem { chart, f, g, base }
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn inputs(&self) -> usize {
        self.g.len()
    }

    /// The control field of a 3-dimensional single-input system.
    pub fn single_input(&self) -> Result<&VectorField, StructureError> {
        if self.dim() != 3 || self.inputs() != 1 {
            return Err(StructureError::Shape {
                n: self.dim(),
                m: self.inputs(),
            });
        }
        Ok(&self.g[0])
    }

    pub fn with_fields(&self, f: VectorField, g: VectorField) -> ControlSystem {
        ControlSystem {
            chart: self.chart.clone(),
            f,
            g: vec![g],
            base: self.base.clone(),
        }
    }
}

/// The brackets the structure functions are built from.
#[derive(Clone, Debug)]
pub struct Brackets {
    /// [g,f]
    pub gf: VectorField,
    /// [g,[g,f]]
    pub ggf: VectorField,
    /// [f,[f,g]]
    pub ffg: VectorField,
}

impl Brackets {
    pub fn of(f: &VectorField, g: &VectorField) -> Brackets {
        let gf = lie_bracket(g, f);
        let ggf = lie_bracket(g, &gf);
        let ffg = lie_bracket(f, &lie_bracket(f, g));
        Brackets { gf, ggf, ffg }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub a1: Check,
    pub a2: Check,
}

impl AssumptionReport {
    pub fn verdict(&self) -> Verdict {
        Verdict::all([&self.a1, &self.a2])
    }
}

/// Checks A1 and A2 on the sampling box.
pub fn check_assumptions(
    sys: &ControlSystem,
    plan: &SamplePlan,
) -> Result<AssumptionReport, StructureError> {
    let g = sys.single_input()?;
    let b = Brackets::of(&sys.f, g);
    let d1 = Frame::new(vec![sys.f.clone(), g.clone(), b.gf.clone()]).determinant();
    let d2 = Frame::new(vec![g.clone(), b.gf.clone(), b.ggf.clone()]).determinant();
    Ok(AssumptionReport {
        a1: Check::nonvanishing("A1", &is_nonvanishing(&d1, &sys.base, plan))
            .with_note("det(f, g, [g,f]) != 0"),
        a2: Check::nonvanishing("A2", &is_nonvanishing(&d2, &sys.base, plan))
            .with_note("det(g, [g,f], [g,[g,f]]) != 0"),
    })
}

/// `(k1, k2, k3)` and `(λ1, λ2, λ3)` as exact symbolic quotients.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureFunctions {
    pub k: [Expr; 3],
    pub lambda: [Expr; 3],
}

impl StructureFunctions {
    pub fn all(&self) -> [&Expr; 6] {
        let [k1, k2, k3] = &self.k;
        let [l1, l2, l3] = &self.lambda;
        [k1, k2, k3, l1, l2, l3]
    }

    pub const NAMES: [&'static str; 6] = ["k1", "k2", "k3", "lambda1", "lambda2", "lambda3"];
}

fn require(report: &AssumptionReport) -> Result<(), StructureError> {
    for (name, c) in [("A1", &report.a1), ("A2", &report.a2)] {
        if !c.passed() {
            let detail = match &c.witness {
                Some(w) => format!("determinant {:e} at {:?}", w.value, w.point),
                None => c.note.clone().unwrap_or_default(),
            };
            return Err(StructureError::Assumption { name, detail });
        }
    }
    Ok(())
}

/// Decomposes `[f,[f,g]]` in `(g, [g,f], [g,[g,f]])` and `[g,[g,f]]` in `(f, g, [g,f])`.
pub fn compute_structure_functions(
    sys: &ControlSystem,
    plan: &SamplePlan,
) -> Result<StructureFunctions, StructureError> {
    require(&check_assumptions(sys, plan)?)?;
    structure_functions_unchecked(sys, plan)
}

/// Like [`compute_structure_functions`] without re-running the assumption checks
/// (the frame decompositions still refuse degenerate frames).
pub fn structure_functions_unchecked(
    sys: &ControlSystem,
    plan: &SamplePlan,
) -> Result<StructureFunctions, StructureError> {
    let g = sys.single_input()?;
    let b = Brackets::of(&sys.f, g);
    let kf = Frame::new(vec![g.clone(), b.gf.clone(), b.ggf.clone()]);
    let lf = Frame::new(vec![sys.f.clone(), g.clone(), b.gf.clone()]);
    let k = decompose_in_frame(&b.ffg, &kf, &sys.base, plan)?.coefficients;
    let lambda = decompose_in_frame(&b.ggf, &lf, &sys.base, plan)?.coefficients;
    Ok(StructureFunctions {
        k: [k[0].clone(), k[1].clone(), k[2].clone()],
        lambda: [lambda[0].clone(), lambda[1].clone(), lambda[2].clone()],
    })
}

/// Residuals of the three compatibility relations between the k's and λ's:
///
/// ```text
/// L_f λ1 + k2 λ1 + L_g(λ1 k3)                                = 0
/// L_f λ2 − λ3 k1 + L_g k1 + k2 λ2 + L_g(λ2 k3)               = 0
/// L_f λ3 − λ2 + k3 λ1 + L_g k2 + L_g(λ3 k3)                  = 0
/// ```
pub fn structure_relation_residuals(
    sf: &StructureFunctions,
    f: &VectorField,
    g: &VectorField,
) -> [Expr; 3] {
    let [k1, k2, k3] = &sf.k;
    let [l1, l2, l3] = &sf.lambda;
    let r1 = f.apply(l1) + k2 * l1 + g.apply(&(l1 * k3));
    let r2 = f.apply(l2) - l3 * k1 + g.apply(k1) + k2 * l2 + g.apply(&(l2 * k3));
    let r3 = f.apply(l3) - l2 + k3 * l1 + g.apply(k2) + g.apply(&(l3 * k3));
    [r1, r2, r3]
}

pub const RELATION_NAMES: [&str; 3] = ["relation_lambda1", "relation_lambda2", "relation_lambda3"];

pub fn verify_structure_relations(
    sf: &StructureFunctions,
    sys: &ControlSystem,
    plan: &SamplePlan,
) -> Result<Vec<Check>, StructureError> {
    let g = sys.single_input()?;
    let residuals = structure_relation_residuals(sf, &sys.f, g);
    Ok(RELATION_NAMES
        .iter()
        .zip(&residuals)
        .map(|(name, r)| {
            Check::zero(
                name,
                &is_identically_zero(std::slice::from_ref(r), &sys.base, plan),
            )
        })
        .collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::check::Outcome;

    pub(crate) fn system(f: [&str; 3], g: [&str; 3], base: [f64; 3]) -> ControlSystem {
        let chart = Chart::new(["x", "y", "w"]);
        let p = |s: &&str| chart.parse(s, &BTreeMap::new()).unwrap();
        let f = VectorField::new(f.iter().map(p));
        let g = VectorField::new(g.iter().map(p));
        ControlSystem::new(chart, f, vec![g], base.to_vec())
    }

    fn values(e: &[Expr], at: &[f64]) -> Vec<f64> {
        e.iter().map(|x| x.eval(at).unwrap()).collect()
    }

    #[test]
    fn elliptic_structure() {
        let sys = system(["cos(w)", "sin(w)", "0"], ["0", "0", "1"], [0.0; 3]);
        let plan = SamplePlan::default();
        let a = check_assumptions(&sys, &plan).unwrap();
        assert_eq!(a.verdict(), Verdict::Yes);
        let sf = compute_structure_functions(&sys, &plan).unwrap();
        let at = [0.2, -0.1, 0.4];
        for (v, e) in values(&sf.k, &at).iter().zip([0.0, 0.0, 0.0]) {
            assert!((v - e).abs() < 1e-12);
        }
        for (v, e) in values(&sf.lambda, &at).iter().zip([-1.0, 0.0, 0.0]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!(verify_structure_relations(&sf, &sys, &plan)
            .unwrap()
            .iter()
            .all(Check::passed));
    }

    #[test]
    fn exponential_wronskian_pair() {
        let sys = system(["exp(w)", "exp(2*w)", "0"], ["0", "0", "1"], [0.0; 3]);
        let sf = compute_structure_functions(&sys, &SamplePlan::default()).unwrap();
        let got = values(&sf.lambda, &[0.1, 0.3, -0.2]);
        for (v, e) in got.iter().zip([-2.0, 0.0, 3.0]) {
            assert!((v - e).abs() < 1e-10, "{got:?}");
        }
    }

    #[test]
    fn assumption_failures() {
        let plan = SamplePlan::default();
        let sys = system(["1", "0", "0"], ["0", "0", "1"], [0.0; 3]);
        assert_eq!(
            check_assumptions(&sys, &plan).unwrap().a1.outcome,
            Outcome::Fail
        );
        let sys = system(["w", "0", "0"], ["0", "0", "1"], [0.0; 3]);
        assert_eq!(
            check_assumptions(&sys, &plan).unwrap().a1.outcome,
            Outcome::Fail
        );
        assert!(matches!(
            compute_structure_functions(&sys, &plan),
            Err(StructureError::Assumption { name: "A1", .. })
        ));
    }

    #[test]
    fn corrupted_structure_functions_break_the_first_relation() {
        let sys = system(["cos(w)", "sin(w)", "0"], ["0", "0", "1"], [0.0; 3]);
        let plan = SamplePlan::default();
        let mut sf = compute_structure_functions(&sys, &plan).unwrap();
        sf.k[1] = &sf.k[1] + Expr::one();
        let checks = verify_structure_relations(&sf, &sys, &plan).unwrap();
        assert_eq!(checks[0].outcome, Outcome::Fail);
        assert!(checks[0].witness.as_ref().unwrap().value.abs() > 0.5);
    }
}
