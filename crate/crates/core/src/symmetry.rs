//! Infinitesimal symmetries and symmetry-based trivialisability tests for
//! systems of any state dimension and number of inputs.
//!
//! "Zero modulo G" is tested as a rank condition: `[v,h] ∈ G` at a sample iff
//! adding it to the control fields does not raise the rank above `m`. This is
//! sound because G is required to have constant rank `m` on the box.

use nalgebra::DMatrix;
use num_rational::Rational64;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::check::{Check, Verdict};
use crate::expr::{differentiate, Expr, SamplePlan, Witness};
use crate::geometry::{
    lie_bracket, numerical_rank, sampled_rank, sampled_rank_rows, Chart, RankReport, VectorField,
};
use crate::structure::ControlSystem;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SymmetryError {
    #[error(
        "the control distribution does not have constant rank {expected} on the box: {report:?}"
    )]
    ControlRank { expected: usize, report: RankReport },
    #[error("expected {expected} candidates (n - m), got {got}")]
    CandidateCount { expected: usize, got: usize },
    #[error("{what} does not have constant rank on the box (witness {witness:?})")]
    RankNotConstant {
        what: &'static str,
        witness: Option<Vec<f64>>,
    },
    #[error("{0}")]
    Shape(String),
}

#[derive(Clone, Debug)]
pub struct SymmetryCandidate {
    pub label: String,
    pub v: VectorField,
}

impl SymmetryCandidate {
    pub fn new(label: impl Into<String>, v: VectorField) -> SymmetryCandidate {
        SymmetryCandidate {
            label: label.into(),
            v,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub label: String,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
}

fn require_control_rank(sys: &ControlSystem, plan: &SamplePlan) -> Result<(), SymmetryError> {
    let m = sys.inputs();
    let report = sampled_rank(&sys.g, &sys.base, plan);
    if !report.is_constant() || report.rank_at_base != m {
        return Err(SymmetryError::ControlRank {
            expected: m,
            report,
        });
    }
    Ok(())
}

/// Passes iff `rank(fields ∪ {extra}) ≤ m` at every sample.
fn in_span_check(
    name: &str,
    fields: &[VectorField],
    extra: &VectorField,
    m: usize,
    base: &[f64],
    plan: &SamplePlan,
) -> Check {
    if extra.is_zero() {
        return Check::pass(name, Some(0.0));
    }
    let mut all: Vec<Expr> = fields
        .iter()
        .flat_map(|f| f.components().to_vec())
        .collect();
    all.extend(extra.components().iter().cloned());
    let n = extra.dim();
    let sampled = plan.evaluate(&all, base);
    for s in &sampled.samples {
        let rank = numerical_rank(&DMatrix::from_row_slice(fields.len() + 1, n, &s.values));
        if rank > m {
            return Check::fail(
                name,
                Some(Witness {
                    point: s.point.clone(),
                    value: rank as f64,
                    component: 0,
                }),
                Some(format!("rank {rank} exceeds {m}")),
            );
        }
    }
    if sampled.is_inconclusive() {
        return Check::inconclusive(name, format!("{} valid samples", sampled.samples.len()));
    }
    Check::pass(name, None)
}

/// `[v, g_i] ∈ G` for every control field and `[v, f] ∈ G`.
pub fn is_infinitesimal_symmetry(
    sys: &ControlSystem,
    cand: &SymmetryCandidate,
    plan: &SamplePlan,
) -> Result<SymmetryReport, SymmetryError> {
    if cand.v.dim() != sys.dim() {
        return Err(SymmetryError::Shape(format!(
            "candidate `{}` has wrong dimension",
            cand.label
        )));
    }
    require_control_rank(sys, plan)?;
    Ok(symmetry_checks(sys, cand, plan))
}

fn symmetry_checks(
    sys: &ControlSystem,
    cand: &SymmetryCandidate,
    plan: &SamplePlan,
) -> SymmetryReport {
    let m = sys.inputs();
    let mut checks = Vec::new();
    for (i, g) in sys.g.iter().enumerate() {
        let name = format!("bracket_with_g{}", i + 1);
        checks.push(in_span_check(
            &name,
            &sys.g,
            &lie_bracket(&cand.v, g),
            m,
            &sys.base,
            plan,
        ));
    }
    checks.push(in_span_check(
        "bracket_with_f",
        &sys.g,
        &lie_bracket(&cand.v, &sys.f),
        m,
        &sys.base,
        plan,
    ));
    SymmetryReport {
        label: cand.label.clone(),
        verdict: Verdict::all(&checks),
        checks,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AbelianReport {
    pub verdict: Verdict,
    pub involutive: Vec<Check>,
    pub commuting: Vec<Check>,
    pub symmetries: Vec<SymmetryReport>,
    pub transversality: Check,
}

/// Certifies trivialisability by exhibiting `n − m` commuting symmetries
/// transversal to G at the base point, with G involutive of constant rank.
pub fn check_abelian_trivialisation(
    sys: &ControlSystem,
    candidates: &[SymmetryCandidate],
    plan: &SamplePlan,
) -> Result<AbelianReport, SymmetryError> {
    let (n, m) = (sys.dim(), sys.inputs());
    if candidates.len() + m != n {
        return Err(SymmetryError::CandidateCount {
            expected: n.saturating_sub(m),
            got: candidates.len(),
        });
    }
    if candidates.iter().any(|c| c.v.dim() != n) {
        return Err(SymmetryError::Shape("candidate of wrong dimension".into()));
    }
    require_control_rank(sys, plan)?;
    let mut involutive = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let name = format!("g{}_g{}_bracket_in_G", i + 1, j + 1);
            involutive.push(in_span_check(
                &name,
                &sys.g,
                &lie_bracket(&sys.g[i], &sys.g[j]),
                m,
                &sys.base,
                plan,
            ));
        }
    }
    let mut commuting = Vec::new();
    for i in 0..candidates.len() {
        for j in i + 1..candidates.len() {
            let name = format!("[{}, {}] = 0", candidates[i].label, candidates[j].label);
            let b = lie_bracket(&candidates[i].v, &candidates[j].v);
            commuting.push(Check::zero(&name, &b.is_identically_zero(&sys.base, plan)));
        }
    }
    let symmetries: Vec<SymmetryReport> = candidates
        .iter()
        .map(|c| symmetry_checks(sys, c, plan))
        .collect();
    let mut span: Vec<VectorField> = candidates.iter().map(|c| c.v.clone()).collect();
    span.extend(sys.g.iter().cloned());
    let rank = sampled_rank(&span, &sys.base, plan);
    let transversality = if rank.samples == 0 {
        Check::inconclusive(
            "transversal_at_base",
            "could not evaluate at the base point".into(),
        )
    } else if rank.rank_at_base == n {
        Check::pass("transversal_at_base", Some(n as f64))
    } else {
        Check::fail(
            "transversal_at_base",
            Some(Witness {
                point: sys.base.clone(),
                value: rank.rank_at_base as f64,
                component: 0,
            }),
            Some(format!("rank {} < {n}", rank.rank_at_base)),
        )
    };
    let verdict = Verdict::all(
        involutive
            .iter()
            .chain(&commuting)
            .chain(std::iter::once(&transversality))
            .chain(symmetries.iter().flat_map(|s| &s.checks)),
    );
    Ok(AbelianReport {
        verdict,
        involutive,
        commuting,
        symmetries,
        transversality,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RankConditionReport {
    pub verdict: Verdict,
    /// rank G¹ − m.
    pub k: usize,
    pub rank_dh: usize,
    pub rank_dh_dw: usize,
    /// Whether `rank ∂H/∂w = rank ∂H/∂(x,w)` agrees with the main verdict.
    pub equivalent_form_agrees: bool,
}

/// Rank test for a system in the form `ẋ_i = h_i(x, w)`, `ẇ_j = u_j`, where the
/// chart lists the `x`'s first and the last `m` coordinates are the `w`'s.
pub fn check_rank_condition_sigma_t(
    h: &[Expr],
    chart: &Chart,
    m: usize,
    base: &[f64],
    plan: &SamplePlan,
) -> Result<RankConditionReport, SymmetryError> {
    let n = chart.dim();
    if m == 0 || m >= n || h.len() != n - m || base.len() != n {
        return Err(SymmetryError::Shape(format!(
            "need n - m = {} functions h on an {n}-dimensional chart with m = {m}",
            n.saturating_sub(m)
        )));
    }
    let mut f = h.to_vec();
    f.extend((0..m).map(|_| Expr::zero()));
    let f = VectorField::new(f);
    let g: Vec<VectorField> = (n - m..n).map(|i| chart.coordinate_field(i)).collect();
    let mut g1 = g.clone();
    g1.extend(g.iter().map(|gi| lie_bracket(&f, gi)));
    let g1_rank = sampled_rank(&g1, base, plan);
    constant(&g1_rank, "G1")?;
    let k = g1_rank.rank_at_base - m;

    let dh: Vec<Vec<Expr>> = h
        .iter()
        .map(|hi| (0..n).map(|j| differentiate(hi, j)).collect())
        .collect();
    let dh_rank = sampled_rank_rows(&dh, base, plan);
    constant(&dh_rank, "dh")?;
    let dw: Vec<Vec<Expr>> = dh.iter().map(|row| row[n - m..].to_vec()).collect();
    let dw_rank = sampled_rank_rows(&dw, base, plan);
    constant(&dw_rank, "dH/dw")?;

    let holds = dh_rank.rank_at_base == k;
    let equivalent = dw_rank.rank_at_base == dh_rank.rank_at_base;
    Ok(RankConditionReport {
        verdict: Verdict::from_bool(holds),
        k,
        rank_dh: dh_rank.rank_at_base,
        rank_dh_dw: dw_rank.rank_at_base,
        equivalent_form_agrees: equivalent == holds,
    })
}

fn constant(r: &RankReport, what: &'static str) -> Result<(), SymmetryError> {
    if r.is_constant() {
        Ok(())
    } else {
        Err(SymmetryError::RankNotConstant {
            what,
            witness: r.witness.clone(),
        })
    }
}

/// `[v_i, v_j] = Σ_k c_k v_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketRelation {
    pub i: usize,
    pub j: usize,
    pub coefficients: Vec<Rational64>,
}

/// An abelian ideal spanned by `ideal` and one more generator `v0` acting
/// diagonally: `[v_i, v0] = λ_i v_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlmostAbelian {
    pub ideal: Vec<usize>,
    pub v0: usize,
    pub eigenvalues: Vec<Rational64>,
    /// For presentations with a vanishing control, the order `k` subject to
    /// `k λ_i / λ_1 ∈ ℤ` and `k λ_i / λ_1 ≥ k`.
    pub k: Option<i64>,
}

/// Generators plus a bracket table; pairs not listed are claimed to commute.
#[derive(Clone, Debug)]
pub struct AlgebraPresentation {
    pub labels: Vec<String>,
    pub generators: Vec<VectorField>,
    pub table: Vec<BracketRelation>,
    pub almost_abelian: Option<AlmostAbelian>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PresentationReport {
    pub verdict: Verdict,
    pub brackets: Vec<Check>,
    pub structure: Vec<Check>,
}

/// Checks `k λ_i / λ_1` is an integer `≥ k` for every eigenvalue.
pub fn integrality_constraint(eigenvalues: &[Rational64], k: i64) -> Result<(), String> {
    let Some(&l1) = eigenvalues.first() else {
        return Err("no eigenvalues".into());
    };
    if k < 1 {
        return Err(format!("k = {k} must be a positive integer"));
    }
    if l1.is_zero() {
        return Err("lambda_1 must be non-zero".into());
    }
    for (i, &li) in eigenvalues.iter().enumerate() {
        let q = Rational64::from_integer(k) * li / l1;
        if !q.is_integer() {
            return Err(format!(
                "k*lambda_{}/lambda_1 = {q} is not an integer",
                i + 1
            ));
        }
        if q < Rational64::from_integer(k) {
            return Err(format!("k*lambda_{}/lambda_1 = {q} < k = {k}", i + 1));
        }
    }
    Ok(())
}

pub fn verify_algebra_presentation(
    a: &AlgebraPresentation,
    base: &[f64],
    plan: &SamplePlan,
) -> Result<PresentationReport, SymmetryError> {
    let r = a.generators.len();
    if a.labels.len() != r {
        return Err(SymmetryError::Shape("one label per generator".into()));
    }
    for rel in &a.table {
        if rel.i >= r || rel.j >= r || rel.coefficients.len() != r {
            return Err(SymmetryError::Shape(format!(
                "table entry ({}, {}) does not fit {r} generators",
                rel.i, rel.j
            )));
        }
    }
    let claimed = |i: usize, j: usize| -> Vec<Rational64> {
        for rel in &a.table {
            if rel.i == i && rel.j == j {
                return rel.coefficients.clone();
            }
            if rel.i == j && rel.j == i {
                return rel.coefficients.iter().map(|c| -c).collect();
            }
        }
        vec![Rational64::zero(); r]
    };
    let mut brackets = Vec::new();
    for i in 0..r {
        for j in i + 1..r {
            let coeffs = claimed(i, j);
            let mut residual = lie_bracket(&a.generators[i], &a.generators[j]);
            for (c, v) in coeffs.iter().zip(&a.generators) {
                if !c.is_zero() {
                    residual = &residual - &v.scale(&Expr::constant(*c));
                }
            }
            let name = format!("[{}, {}]", a.labels[i], a.labels[j]);
            brackets.push(Check::zero(
                &name,
                &residual.is_identically_zero(base, plan),
            ));
        }
    }
    let mut structure = Vec::new();
    if let Some(aa) = &a.almost_abelian {
        if aa.ideal.len() != aa.eigenvalues.len()
            || aa.ideal.iter().chain([&aa.v0]).any(|&x| x >= r)
        {
            return Err(SymmetryError::Shape(
                "almost-abelian metadata does not fit the generators".into(),
            ));
        }
        let mut abelian = true;
        for (p, &i) in aa.ideal.iter().enumerate() {
            for &j in &aa.ideal[p + 1..] {
                abelian &= claimed(i, j).iter().all(Zero::is_zero);
            }
        }
        structure.push(if abelian {
            Check::pass("ideal_abelian", None)
        } else {
            Check::fail(
                "ideal_abelian",
                None,
                Some("table lists a non-zero bracket inside the ideal".into()),
            )
        });
        let mut diagonal = true;
        for (&i, &li) in aa.ideal.iter().zip(&aa.eigenvalues) {
            let expected: Vec<Rational64> = (0..r)
                .map(|k| if k == i { li } else { Rational64::zero() })
                .collect();
            diagonal &= claimed(i, aa.v0) == expected;
        }
        structure.push(if diagonal {
            Check::pass("v0_acts_diagonally", None)
        } else {
            Check::fail(
                "v0_acts_diagonally",
                None,
                Some("table disagrees with [v_i, v0] = lambda_i v_i".into()),
            )
        });
        if let Some(k) = aa.k {
            structure.push(match integrality_constraint(&aa.eigenvalues, k) {
                Ok(()) => Check::pass("integrality", None),
                Err(e) => Check::fail("integrality", None, Some(e)),
            });
        }
    }
    let verdict = Verdict::all(brackets.iter().chain(&structure));
    Ok(PresentationReport {
        verdict,
        brackets,
        structure,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::check::Outcome;
    use crate::structure::tests::system;

    fn field(chart: &Chart, comps: &[&str]) -> VectorField {
        VectorField::new(
            comps
                .iter()
                .map(|s| chart.parse(s, &BTreeMap::new()).unwrap()),
        )
    }

    fn elliptic() -> ControlSystem {
        system(["cos(w)", "sin(w)", "0"], ["0", "0", "1"], [0.0; 3])
    }

    #[test]
    fn symmetries_of_the_elliptic_model() {
        let plan = SamplePlan::default();
        let sys = elliptic();
        let dx = SymmetryCandidate::new("dx", field(&sys.chart, &["1", "0", "0"]));
        let xdx = SymmetryCandidate::new("x dx", field(&sys.chart, &["x", "0", "0"]));
        assert_eq!(
            is_infinitesimal_symmetry(&sys, &dx, &plan).unwrap().verdict,
            Verdict::Yes
        );
        let r = is_infinitesimal_symmetry(&sys, &xdx, &plan).unwrap();
        assert_eq!(r.verdict, Verdict::No);
        assert_eq!(r.checks[1].outcome, Outcome::Fail);
    }

    #[test]
    fn abelian_trivialisation() {
        let plan = SamplePlan::default();
        let sys = elliptic();
        let c = |l: &str, v: &[&str]| SymmetryCandidate::new(l, field(&sys.chart, v));
        let good = [c("dx", &["1", "0", "0"]), c("dy", &["0", "1", "0"])];
        assert_eq!(
            check_abelian_trivialisation(&sys, &good, &plan)
                .unwrap()
                .verdict,
            Verdict::Yes
        );
        let bad = [c("dx", &["1", "0", "0"]), c("dw", &["0", "0", "1"])];
        let r = check_abelian_trivialisation(&sys, &bad, &plan).unwrap();
        assert_eq!(r.verdict, Verdict::No);
        assert_eq!(r.transversality.outcome, Outcome::Fail);
        assert!(matches!(
            check_abelian_trivialisation(&sys, &good[..1], &plan),
            Err(SymmetryError::CandidateCount {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn rank_condition_examples() {
        let plan = SamplePlan::default();
        let chart = Chart::new(["x1", "x2", "w"]);
        let p = |s: &str| chart.parse(s, &BTreeMap::new()).unwrap();
        let base = [0.0, 0.0, 0.3];
        let yes =
            check_rank_condition_sigma_t(&[p("w"), p("w^2")], &chart, 1, &base, &plan).unwrap();
        assert_eq!((yes.verdict, yes.k, yes.rank_dh), (Verdict::Yes, 1, 1));
        assert!(yes.equivalent_form_agrees);
        let no = check_rank_condition_sigma_t(&[p("w"), p("x1")], &chart, 1, &base, &plan).unwrap();
        assert_eq!((no.verdict, no.k, no.rank_dh), (Verdict::No, 1, 2));
        assert!(no.equivalent_form_agrees);
        let chart4 = Chart::new(["x1", "x2", "w1", "w2"]);
        let q = |s: &str| chart4.parse(s, &BTreeMap::new()).unwrap();
        let r =
            check_rank_condition_sigma_t(&[q("w1"), q("exp(w1)")], &chart4, 2, &[0.0; 4], &plan)
                .unwrap();
        assert_eq!((r.verdict, r.k), (Verdict::Yes, 1));
    }

    #[test]
    fn integrality() {
        let r = |n, d| Rational64::new(n, d);
        assert!(integrality_constraint(&[r(1, 1), r(3, 2)], 2).is_ok());
        let err = integrality_constraint(&[r(2, 1), r(1, 1)], 2).unwrap_err();
        assert!(err.contains("< k"), "{err}");
        assert!(integrality_constraint(&[r(1, 1), r(1, 3)], 2).is_err());
    }
}
