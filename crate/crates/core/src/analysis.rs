//! The full pipeline on one system and its comparison with an expected block.

use serde::Serialize;

use crate::check::{Check, Outcome, Verdict};
use crate::classify::{classify_family, Family, FamilyPredicates, TrivialisabilityReport};
use crate::expr::{Expr, SamplePlan, Witness};
use crate::invariants::{InvariantError, InvariantTriple};
use crate::structure::{
    check_assumptions, compute_structure_functions, AssumptionReport, ControlSystem,
    StructureError, StructureFunctions,
};
use crate::symmetry::{
    is_infinitesimal_symmetry, verify_algebra_presentation, AlgebraPresentation,
    PresentationReport, SymmetryCandidate, SymmetryReport,
};
use crate::sysfile::{Expected, SpecError, SystemSpec};

/// Expressions with more tree nodes than this are reported by size only.
pub const PRINT_CAP: u64 = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Analyzed,
    AssumptionsFailed,
    Inconclusive,
    /// Not a three-dimensional single-input system; only symmetry checks apply.
    UnsupportedShape,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Analyzed | Status::UnsupportedShape => 0,
            Status::AssumptionsFailed => 2,
            Status::Inconclusive => 3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExprReport {
    pub name: String,
    pub expr: String,
    pub value_at_base: Option<f64>,
}

impl ExprReport {
    pub fn new(name: &str, e: &Expr, base: &[f64]) -> ExprReport {
        let expr = if e.tree_size() <= PRINT_CAP {
            e.to_string()
        } else {
            format!("<{} nodes>", e.tree_size())
        };
        ExprReport {
            name: name.into(),
            expr,
            value_at_base: e.eval(base).ok().filter(|v| v.is_finite()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantsReport {
    pub epsilon: i8,
    pub kappa: ExprReport,
    pub nu: ExprReport,
    pub nu_flipped: bool,
    pub nu_convention: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub vars: Vec<String>,
    pub base: Vec<f64>,
    pub plan: SamplePlan,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure_functions: Option<Vec<ExprReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariants: Option<InvariantsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trivialisable: Option<TrivialisabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family_checks: Option<FamilyPredicates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency: Option<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<SymmetrySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The claimed symmetry algebra of a system file, checked.
#[derive(Clone, Debug, Serialize)]
pub struct SymmetrySection {
    pub verdict: Verdict,
    pub presentation: Result<PresentationReport, String>,
    pub generators: Vec<Result<SymmetryReport, String>>,
}

impl SymmetrySection {
    pub fn new(sys: &ControlSystem, p: &AlgebraPresentation, plan: &SamplePlan) -> SymmetrySection {
        let presentation =
            verify_algebra_presentation(p, &sys.base, plan).map_err(|e| e.to_string());
        let generators: Vec<_> = p
            .labels
            .iter()
            .zip(&p.generators)
            .map(|(label, v)| {
                let cand = SymmetryCandidate::new(label.clone(), v.clone());
                is_infinitesimal_symmetry(sys, &cand, plan).map_err(|e| e.to_string())
            })
            .collect();
        let verdicts = std::iter::once(presentation.as_ref().map(|r| r.verdict))
            .chain(generators.iter().map(|g| g.as_ref().map(|r| r.verdict)));
        let mut verdict = Verdict::Yes;
        for v in verdicts {
            match v {
                Ok(Verdict::Yes) => {}
                Ok(Verdict::Inconclusive) => verdict = Verdict::Inconclusive,
                Ok(Verdict::No) | Err(_) => {
                    return SymmetrySection {
                        verdict: Verdict::No,
                        presentation,
                        generators,
                    }
                }
            }
        }
        SymmetrySection {
            verdict,
            presentation,
            generators,
        }
    }

    /// One check for the presentation and one per generator.
    pub fn checks(&self) -> Vec<Check> {
        let mut out = vec![match &self.presentation {
            Ok(rep) if rep.verdict == Verdict::Yes => Check::pass("presentation", None),
            Ok(rep) => {
                let bad = rep
                    .brackets
                    .iter()
                    .chain(&rep.structure)
                    .find(|c| !c.passed());
                match bad {
                    Some(c) => Check {
                        name: "presentation".into(),
                        note: Some(match &c.note {
                            Some(n) => format!("{}: {n}", c.name),
                            None => c.name.clone(),
                        }),
                        ..c.clone()
                    },
                    None => Check::inconclusive("presentation", "no failing check".into()),
                }
            }
            Err(e) => Check::fail("presentation", None, Some(e.clone())),
        }];
        for g in &self.generators {
            out.push(match g {
                Ok(rep) => {
                    let name = format!("symmetry {}", rep.label);
                    match rep.checks.iter().find(|c| !c.passed()) {
                        None => Check::pass(&name, None),
                        Some(c) => Check {
                            name,
                            note: Some(c.name.clone()),
                            ..c.clone()
                        },
                    }
                }
                Err(e) => Check::fail("symmetry", None, Some(e.clone())),
            });
        }
        out
    }
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize") + "\n"
    }

    /// Every failing or inconclusive check with its witness, once per name.
    pub fn findings(&self) -> Vec<&Check> {
        let mut all: Vec<&Check> = Vec::new();
        if let Some(a) = &self.assumptions {
            all.extend([&a.a1, &a.a2]);
        }
        if let Some(t) = &self.trivialisable {
            all.extend(&t.checks);
        }
        if let Some(p) = &self.family_checks {
            all.extend([&p.kappa_zero, &p.nu_zero, &p.kappa_constant, &p.nu_constant]);
        }
        all.extend(&self.consistency);
        let mut seen = std::collections::BTreeSet::new();
        all.into_iter()
            .filter(|c| c.outcome != Outcome::Pass && seen.insert(c.name.as_str()))
            .collect()
    }
}

/// The report plus the symbolic results it was printed from.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub report: AnalysisReport,
    pub structure: Option<StructureFunctions>,
    pub invariants: Option<InvariantTriple>,
}

pub fn analyze(sys: &ControlSystem, plan: &SamplePlan) -> Analysis {
    let mut out = Analysis {
        report: AnalysisReport {
            vars: sys.chart.names().to_vec(),
            base: sys.base.clone(),
            plan: plan.clone(),
            status: Status::Analyzed,
            assumptions: None,
            structure_functions: None,
            invariants: None,
            trivialisable: None,
            family: None,
            family_checks: None,
            consistency: None,
            symmetry: None,
            error: None,
        },
        structure: None,
        invariants: None,
    };
    match check_assumptions(sys, plan) {
        Err(e) => {
            out.report.status = Status::UnsupportedShape;
            out.report.error = Some(e.to_string());
            return out;
        }
        Ok(a) => {
            let verdict = a.verdict();
            out.report.assumptions = Some(a);
            match verdict {
                Verdict::Yes => {}
                Verdict::No => {
                    out.report.status = Status::AssumptionsFailed;
                    return out;
                }
                Verdict::Inconclusive => {
                    out.report.status = Status::Inconclusive;
                    return out;
                }
            }
        }
    }
    let sf = match compute_structure_functions(sys, plan) {
        Ok(sf) => sf,
        Err(e) => {
            out.report.status = status_of_structure_error(&e);
            out.report.error = Some(e.to_string());
            return out;
        }
    };
    out.report.structure_functions = Some(
        StructureFunctions::NAMES
            .iter()
            .zip(sf.all())
            .map(|(n, e)| ExprReport::new(n, e, &sys.base))
            .collect(),
    );
    out.structure = Some(sf);
    match classify_family(sys, plan) {
        Ok(c) => {
            out.report.invariants = Some(InvariantsReport {
                epsilon: c.invariants.epsilon,
                kappa: ExprReport::new("kappa", &c.invariants.kappa, &sys.base),
                nu: ExprReport::new("nu", &c.invariants.nu, &sys.base),
                nu_flipped: c.invariants.nu_flipped,
                nu_convention: c.invariants.nu_convention,
            });
            if c.family == Family::Inconclusive || c.trivialisable.verdict == Verdict::Inconclusive
            {
                out.report.status = Status::Inconclusive;
            }
            out.report.trivialisable = Some(c.trivialisable);
            out.report.family = Some(c.family);
            out.report.family_checks = Some(c.predicates);
            out.report.consistency = c.consistency;
            out.invariants = Some(c.invariants);
        }
        Err(e) => {
            out.report.status = match &e {
                InvariantError::Structure(s) => status_of_structure_error(s),
                InvariantError::SignChange(_) => Status::AssumptionsFailed,
                _ => Status::Inconclusive,
            };
            out.report.error = Some(e.to_string());
        }
    }
    out
}

/// [`analyze`] plus the symmetry section when the file claims a presentation.
pub fn analyze_spec(spec: &SystemSpec, plan: &SamplePlan) -> Result<Analysis, SpecError> {
    let sys = spec.build()?;
    let presentation = spec.presentation()?;
    let mut out = analyze(&sys, plan);
    out.report.symmetry = presentation.map(|p| SymmetrySection::new(&sys, &p, plan));
    Ok(out)
}

fn status_of_structure_error(e: &StructureError) -> Status {
    match e {
        StructureError::Shape { .. } => Status::UnsupportedShape,
        StructureError::Assumption { .. } => Status::AssumptionsFailed,
        StructureError::Frame(_) => Status::Inconclusive,
    }
}

/// Largest `|e|` over the sample points, with the point where it occurs.
pub fn max_abs(e: &Expr, base: &[f64], plan: &SamplePlan) -> Option<(f64, Vec<f64>)> {
    let sampled = plan.evaluate(std::slice::from_ref(e), base);
    if sampled.is_inconclusive() {
        return None;
    }
    sampled
        .samples
        .iter()
        .map(|s| (s.values[0].abs(), s.point.clone()))
        .max_by(|a, b| a.0.total_cmp(&b.0))
}

/// Passes iff the maximum sampled `|e|` is at most `tol`.
pub fn max_error_check(name: &str, e: &Expr, tol: f64, base: &[f64], plan: &SamplePlan) -> Check {
    match max_abs(e, base, plan) {
        None => Check::inconclusive(name, "too few valid samples".into()),
        Some((err, _)) if err <= tol => Check::pass(name, Some(err)),
        Some((err, point)) => Check::fail(
            name,
            Some(Witness {
                point,
                value: err,
                component: 0,
            }),
            Some(format!("max error {err:.3e} > {tol:e}")),
        ),
    }
}

fn compare<T: PartialEq + std::fmt::Debug>(name: &str, got: Option<T>, want: T) -> Check {
    match got {
        Some(g) if g == want => Check::pass(name, None),
        g => Check::fail(name, None, Some(format!("got {g:?}, expected {want:?}"))),
    }
}

/// Compares an analysis with an expected block; invariants to within `tol`.
pub fn check_expected(
    spec: &SystemSpec,
    expected: &Expected,
    tol: f64,
) -> Result<Vec<Check>, SpecError> {
    let sys = spec.build()?;
    let plan = spec.plan();
    let analysis = analyze_spec(spec, &plan)?;
    let r = &analysis.report;
    let mut checks = Vec::new();
    let holds = r.assumptions.as_ref().map(|a| a.verdict() == Verdict::Yes);
    checks.push(compare(
        "assumptions",
        Some(holds.unwrap_or(false)),
        expected.assumptions,
    ));
    let params = spec.param_values()?;
    let parse = |field: &str, s: &str| {
        sys.chart
            .parse(s, &params)
            .map_err(|source| SpecError::Parse {
                field: format!("expected.{field}"),
                source,
            })
    };
    if let Some(eps) = expected.epsilon {
        checks.push(compare(
            "epsilon",
            r.invariants.as_ref().map(|i| i.epsilon),
            eps,
        ));
    }
    let inv = analysis.invariants.as_ref();
    if let Some(k) = &expected.kappa {
        let want = parse("kappa", k)?;
        checks.push(match inv {
            Some(i) => max_error_check("kappa", &(&i.kappa - &want), tol, &sys.base, &plan),
            None => Check::fail("kappa", None, Some("no invariants computed".into())),
        });
    }
    if let Some(n) = &expected.nu {
        let want = parse("nu", n)?;
        checks.push(match inv {
            Some(i) => {
                let plus = max_error_check("nu", &(&i.nu - &want), tol, &sys.base, &plan);
                if plus.passed() {
                    plus
                } else {
                    let minus = max_error_check("nu", &(&i.nu + &want), tol, &sys.base, &plan);
                    if minus.passed() {
                        minus.with_note("agrees up to the global sign of nu")
                    } else {
                        plus
                    }
                }
            }
            None => Check::fail("nu", None, Some("no invariants computed".into())),
        });
    }
    if let Some(t) = expected.trivialisable {
        checks.push(compare(
            "trivialisable",
            r.trivialisable.as_ref().map(|t| t.verdict),
            t,
        ));
    }
    if let Some(f) = expected.family {
        checks.push(compare("family", r.family, f));
    }
    if let Some(section) = &r.symmetry {
        checks.extend(section.checks());
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{generate_with, CatalogFamily};

    #[test]
    fn elliptic_report() {
        let e = generate_with(CatalogFamily::CompletelyFlat, &[("eps", "-1")]).unwrap();
        let sys = e.spec.build().unwrap();
        let a = analyze(&sys, &SamplePlan::default());
        assert_eq!(a.report.status, Status::Analyzed);
        assert_eq!(a.report.family, Some(Family::CompletelyFlat));
        assert!(a.report.findings().is_empty());
        let checks = check_expected(&e.spec, e.expected(), 1e-7).unwrap();
        assert!(checks.iter().all(Check::passed), "{checks:#?}");
    }

    #[test]
    fn degenerate_drift_fails_assumptions() {
        let spec = SystemSpec::from_json(
            r#"{"vars":["x","y","w"],"f":["1","0","0"],"g":[["0","0","0"]],"base":[0,0,0]}"#,
        )
        .unwrap();
        let a = analyze(&spec.build().unwrap(), &SamplePlan::default());
        assert_eq!(a.report.status, Status::AssumptionsFailed);
        assert_eq!(a.report.status.exit_code(), 2);
        assert_eq!(a.report.findings()[0].name, "A1");
    }

    #[test]
    fn reports_are_deterministic() {
        let e = generate_with(CatalogFamily::FlatConstant, &[("kappa", "1")]).unwrap();
        let sys = e.spec.build().unwrap();
        let plan = SamplePlan::default();
        assert_eq!(
            analyze(&sys, &plan).report.to_json(),
            analyze(&sys, &plan).report.to_json()
        );
    }
}
