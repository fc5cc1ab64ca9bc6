//! Built-in verification suites: catalog round trips, the feedback
//! transformation rules, structure relations, invariance, symmetries and the
//! bracket calculus itself.

use serde::Serialize;

use crate::analysis::{check_expected, max_abs};
use crate::catalog::{generate_with, sweep, CatalogFamily};
use crate::check::{Check, Verdict};
use crate::classify::{check_trivialisable, classify_family, Route};
use crate::expr::{differentiate, is_identically_zero, substitute, Expr, SamplePlan, Witness};
use crate::feedback::{apply_feedback, predict_transformed_structure, pushforward, Diffeomorphism};
use crate::geometry::{lie_bracket, Chart, VectorField};
use crate::invariants::{canonicalize, compute_invariants, verify_kappa_nu_relation, Mode};
use crate::random::{random_feedback, random_field, random_system, rng, xyw_chart};
use crate::structure::{
    compute_structure_functions, verify_structure_relations, ControlSystem, StructureFunctions,
};
use crate::symmetry::{
    check_abelian_trivialisation, check_rank_condition_sigma_t, integrality_constraint,
    is_infinitesimal_symmetry, verify_algebra_presentation, SymmetryCandidate,
};

pub const SUITES: [&str; 6] = [
    "catalog-roundtrip",
    "transform-rules",
    "relations",
    "invariance",
    "symmetry",
    "calculus",
];

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub verdict: Verdict,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(name: &str, checks: Vec<Check>) -> SuiteReport {
        SuiteReport {
            name: name.into(),
            verdict: Verdict::all(&checks),
            checks,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

/// Runs a suite by name; `seed` drives the random corpora.
pub fn run_suite(name: &str, seed: u64) -> Option<SuiteReport> {
    let checks = match name {
        "catalog-roundtrip" => catalog_roundtrip(),
        "transform-rules" => transform_rules(seed),
        "relations" => relations(seed),
        "invariance" => invariance(seed),
        "symmetry" => symmetry(),
        "calculus" => calculus(seed),
        _ => return None,
    };
    Some(SuiteReport::new(name, checks))
}

fn tol_plan(tol: f64) -> SamplePlan {
    SamplePlan {
        abs_tol: tol,
        rel_tol: tol,
        ..SamplePlan::default()
    }
}

fn prefixed(prefix: &str, checks: impl IntoIterator<Item = Check>) -> Vec<Check> {
    checks
        .into_iter()
        .map(|mut c| {
            c.name = format!("{prefix}: {}", c.name);
            c
        })
        .collect()
}

fn error_check(name: &str, e: impl std::fmt::Display) -> Check {
    Check::fail(name, None, Some(e.to_string()))
}

fn zero_check(name: &str, e: Expr, base: &[f64], plan: &SamplePlan) -> Check {
    Check::zero(name, &is_identically_zero(&[e], base, plan))
}

fn expect(name: &str, ok: bool, detail: impl FnOnce() -> String) -> Check {
    if ok {
        Check::pass(name, None)
    } else {
        Check::fail(name, None, Some(detail()))
    }
}

fn label(family: CatalogFamily, params: &[(&str, &str)]) -> String {
    let p: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{family}({})", p.join(", "))
}

fn catalog_system(family: CatalogFamily, params: &[(&str, &str)]) -> ControlSystem {
    generate_with(family, params)
        .expect("catalog parameters are valid")
        .spec
        .build()
        .expect("catalog specs build")
}

fn catalog_roundtrip() -> Vec<Check> {
    let mut out = Vec::new();
    for (family, params) in sweep() {
        let name = label(family, &params);
        match generate_with(family, &params) {
            Ok(e) => match check_expected(&e.spec, e.expected(), 1e-7) {
                Ok(checks) => out.extend(prefixed(&name, checks)),
                Err(err) => out.push(error_check(&name, err)),
            },
            Err(err) => out.push(error_check(&name, err)),
        }
    }
    out
}

/// Predicted vs recomputed structure functions under random feedback.
fn transform_rules(seed: u64) -> Vec<Check> {
    let gen = SamplePlan::default();
    let plan = tol_plan(1e-8);
    let mut r = rng(seed);
    let mut out = Vec::new();
    for s in 0..10 {
        let sys = random_system(&mut r, &gen);
        let sf = match compute_structure_functions(&sys, &plan) {
            Ok(sf) => sf,
            Err(e) => {
                out.push(error_check(&format!("system {s}"), e));
                continue;
            }
        };
        for t in 0..10 {
            let name = format!("system {s}, feedback {t}");
            let fb = random_feedback(&mut r, &sys, &gen);
            let recomputed = apply_feedback(&sys, &fb, &plan)
                .map_err(|e| e.to_string())
                .and_then(|ts| compute_structure_functions(&ts, &plan).map_err(|e| e.to_string()));
            let predicted = predict_transformed_structure(&sf, &fb, &sys);
            out.push(match (predicted, recomputed) {
                (Ok(p), Ok(rc)) => {
                    let residuals: Vec<Expr> =
                        p.all().iter().zip(rc.all()).map(|(a, b)| *a - b).collect();
                    let c = Check::zero(&name, &is_identically_zero(&residuals, &sys.base, &plan));
                    match c.witness.as_ref().map(|w| w.component) {
                        Some(i) => c.with_note(format!("{} differs", StructureFunctions::NAMES[i])),
                        None => c,
                    }
                }
                (Err(e), _) => error_check(&name, e),
                (_, Err(e)) => error_check(&name, e),
            });
        }
    }
    out
}

/// Three-dimensional catalog instances whose assumptions hold.
fn regular_catalog() -> Vec<(String, ControlSystem)> {
    sweep()
        .into_iter()
        .filter_map(|(family, params)| {
            let e = generate_with(family, &params).ok()?;
            if !e.expected().assumptions || e.spec.vars.len() != 3 {
                return None;
            }
            Some((label(family, &params), e.spec.build().ok()?))
        })
        .collect()
}

fn random_corpus(seed: u64, n: usize) -> Vec<(String, ControlSystem)> {
    let plan = SamplePlan::default();
    let mut r = rng(seed);
    (0..n)
        .map(|i| (format!("random {i}"), random_system(&mut r, &plan)))
        .collect()
}

fn relations(seed: u64) -> Vec<Check> {
    let plan = tol_plan(1e-9);
    let mut out = Vec::new();
    for (name, sys) in regular_catalog().into_iter().chain(random_corpus(seed, 10)) {
        match compute_structure_functions(&sys, &plan) {
            Ok(sf) => match verify_structure_relations(&sf, &sys, &plan) {
                Ok(c) => out.extend(prefixed(&name, c)),
                Err(e) => out.push(error_check(&name, e)),
            },
            Err(e) => out.push(error_check(&name, e)),
        }
        match canonicalize(&sys, &plan) {
            Ok(cp) => out.extend(prefixed(
                &name,
                verify_kappa_nu_relation(&cp, &sys.base, &plan),
            )),
            Err(e) => out.push(error_check(&name, e)),
        }
    }
    out
}

fn parse_all(chart: &Chart, src: &[&str]) -> Vec<Expr> {
    src.iter()
        .map(|s| {
            chart
                .parse(s, &Default::default())
                .expect("literal expressions parse")
        })
        .collect()
}

/// Test diffeomorphisms of `(x, y, w)` with their inverses.
fn test_diffeomorphisms() -> Vec<(&'static str, Diffeomorphism)> {
    let c = xyw_chart();
    let d = |f: [&str; 3], i: [&str; 3]| Diffeomorphism::new(parse_all(&c, &f), parse_all(&c, &i));
    vec![
        ("swap x,y", d(["y", "x", "w"], ["y", "x", "w"])),
        ("shear", d(["x + y^2", "y", "w"], ["x - y^2", "y", "w"])),
        (
            "mixed",
            d(
                ["x", "y + sin(x)/2", "w + x/3"],
                ["x", "y - sin(x)/2", "w - x/3"],
            ),
        ),
        ("scale", d(["2*x", "y", "w"], ["x/2", "y", "w"])),
    ]
}

/// `a ≡ b` or `a ≡ −b`.
fn equal_up_to_sign(name: &str, a: &Expr, b: &Expr, base: &[f64], plan: &SamplePlan) -> Check {
    let plus = zero_check(name, a - b, base, plan);
    if plus.passed() {
        return plus;
    }
    let minus = zero_check(name, a + b, base, plan);
    if minus.passed() {
        minus
    } else {
        plus
    }
}

fn pulled_back(e: &Expr, d: &Diffeomorphism) -> Expr {
    let subs: Vec<Option<Expr>> = d.forward.iter().cloned().map(Some).collect();
    substitute(e, &subs)
}

fn invariance(seed: u64) -> Vec<Check> {
    let plan = tol_plan(1e-8);
    let gen = SamplePlan::default();
    let mut r = rng(seed ^ 0x5eed);
    let mut out = Vec::new();

    let mut subjects = random_corpus(seed, 5);
    for (family, params) in [
        (CatalogFamily::CompletelyFlat, vec![("eps", "-1")]),
        (
            CatalogFamily::FlatConstant,
            vec![("eps", "1"), ("kappa", "1")],
        ),
        (CatalogFamily::CentroFlat, vec![("eps", "-1")]),
        (CatalogFamily::SigmaT2, vec![("eps", "1"), ("nu", "w")]),
    ] {
        subjects.push((label(family, &params), catalog_system(family, &params)));
    }

    for (name, sys) in &subjects {
        let inv = match compute_invariants(sys, &plan, Mode::ViaCanonical) {
            Ok(i) => i,
            Err(e) => {
                out.push(error_check(name, e));
                continue;
            }
        };
        for t in 0..4 {
            let tag = format!("{name}, feedback {t}");
            let fb = random_feedback(&mut r, sys, &gen);
            let moved = apply_feedback(sys, &fb, &plan)
                .map_err(|e| e.to_string())
                .and_then(|s| {
                    compute_invariants(&s, &plan, Mode::ViaCanonical).map_err(|e| e.to_string())
                });
            match moved {
                Ok(m) => {
                    out.push(expect(
                        &format!("{tag}: epsilon"),
                        m.epsilon == inv.epsilon,
                        || format!("{} vs {}", m.epsilon, inv.epsilon),
                    ));
                    out.push(zero_check(
                        &format!("{tag}: kappa"),
                        &m.kappa - &inv.kappa,
                        &sys.base,
                        &plan,
                    ));
                    out.push(equal_up_to_sign(
                        &format!("{tag}: |nu|"),
                        &m.nu,
                        &inv.nu,
                        &sys.base,
                        &plan,
                    ));
                }
                Err(e) => out.push(error_check(&tag, e)),
            }
        }
        // The image of the sampling box moves, so compare on a smaller box.
        let near = SamplePlan {
            half_width: 0.25,
            ..plan.clone()
        };
        for (dname, d) in test_diffeomorphisms() {
            let tag = format!("{name}, {dname}");
            let plan = &near;
            let moved = pushforward(sys, &d, plan)
                .map_err(|e| e.to_string())
                .and_then(|s| {
                    compute_invariants(&s, plan, Mode::ViaCanonical).map_err(|e| e.to_string())
                });
            match moved {
                Ok(m) => {
                    out.push(zero_check(
                        &format!("{tag}: kappa pull-back"),
                        pulled_back(&m.kappa, &d) - &inv.kappa,
                        &sys.base,
                        plan,
                    ));
                    out.push(equal_up_to_sign(
                        &format!("{tag}: |nu| pull-back"),
                        &pulled_back(&m.nu, &d),
                        &inv.nu,
                        &sys.base,
                        plan,
                    ));
                }
                Err(e) => out.push(error_check(&tag, e)),
            }
        }
    }

    // As a coordinate change w ↦ −w leaves the canonical ν invariant (the
    // canonical β is positive); reversing w in the component functions, i.e.
    // the coordinate change followed by u ↦ −u, flips it.
    let c = xyw_chart();
    let flip = Diffeomorphism::new(
        parse_all(&c, &["x", "y", "-w"]),
        parse_all(&c, &["x", "y", "-w"]),
    );
    let subs: Vec<Option<Expr>> = flip.forward.iter().cloned().map(Some).collect();
    for (family, params) in [
        (CatalogFamily::CompletelyFlat, vec![("eps", "-1")]),
        (CatalogFamily::SigmaT1, vec![("eps", "-1"), ("nu", "1")]),
    ] {
        let tag = format!("{}, w -> -w", label(family, &params));
        let sys = catalog_system(family, &params);
        let reversed = ControlSystem {
            chart: sys.chart.clone(),
            f: sys.f.map(|e| substitute(e, &subs)),
            g: sys
                .g
                .iter()
                .map(|g| g.map(|e| substitute(e, &subs)))
                .collect(),
            base: flip.image_of(&sys.base).expect("linear map"),
        };
        let res = (|| -> Result<_, String> {
            let cp = canonicalize(&sys, &plan).map_err(|e| e.to_string())?;
            let moved = pushforward(&sys, &flip, &plan).map_err(|e| e.to_string())?;
            let cp_moved = canonicalize(&moved, &plan).map_err(|e| e.to_string())?;
            let cp_rev = canonicalize(&reversed, &plan).map_err(|e| e.to_string())?;
            let before = classify_family(&sys, &plan)
                .map_err(|e| e.to_string())?
                .family;
            let after = classify_family(&reversed, &plan)
                .map_err(|e| e.to_string())?
                .family;
            Ok((cp, cp_moved, cp_rev, before, after))
        })();
        match res {
            Ok((cp, cp_moved, cp_rev, before, after)) => {
                let base = &sys.base;
                out.push(zero_check(
                    &format!("{tag}: nu invariant under the coordinate change"),
                    pulled_back(&cp_moved.nu, &flip) - &cp.nu,
                    base,
                    &plan,
                ));
                let nu_rev = pulled_back(&cp_rev.nu, &flip);
                let mut flipped = zero_check(
                    &format!("{tag}: nu flips with u -> -u"),
                    &nu_rev + &cp.nu,
                    base,
                    &plan,
                );
                if flipped.passed()
                    && is_identically_zero(std::slice::from_ref(&cp.nu), base, &plan).is_zero()
                {
                    flipped = flipped.with_note("nu vanishes identically here");
                }
                out.push(flipped);
                out.push(expect(
                    &format!("{tag}: family unchanged"),
                    before == after,
                    || format!("{before:?} vs {after:?}"),
                ));
            }
            Err(e) => out.push(error_check(&tag, e)),
        }
    }
    out
}

fn verdict_check(name: &str, got: Result<Verdict, String>, want: Verdict) -> Check {
    match got {
        Ok(v) => expect(name, v == want, || format!("got {v:?}, expected {want:?}")),
        Err(e) => error_check(name, e),
    }
}

fn symmetry() -> Vec<Check> {
    let plan = SamplePlan::default();
    let mut out = Vec::new();
    let c = xyw_chart();
    let field = |src: [&str; 3]| VectorField::new(parse_all(&c, &src));
    let elliptic = catalog_system(CatalogFamily::CompletelyFlat, &[("eps", "-1")]);

    let sym = |sys: &ControlSystem, label: &str, v: VectorField| {
        is_infinitesimal_symmetry(sys, &SymmetryCandidate::new(label, v), &plan)
            .map(|r| r.verdict)
            .map_err(|e| e.to_string())
    };
    out.push(verdict_check(
        "elliptic: d/dx is a symmetry",
        sym(&elliptic, "dx", field(["1", "0", "0"])),
        Verdict::Yes,
    ));
    out.push(verdict_check(
        "elliptic: x d/dx is not a symmetry",
        sym(&elliptic, "xdx", field(["x", "0", "0"])),
        Verdict::No,
    ));

    let sigma = generate_with(CatalogFamily::SigmaLambda, &[("lambda", "1,-1")]).expect("valid");
    let sigma_sys = sigma.spec.build().expect("builds");
    let pres = sigma
        .spec
        .presentation()
        .expect("valid")
        .expect("has a presentation");
    let v0 = pres
        .labels
        .iter()
        .position(|l| l == "v0")
        .expect("v0 generator");
    out.push(verdict_check(
        "sigma-lambda(1,-1): v0 is a symmetry",
        sym(&sigma_sys, "v0", pres.generators[v0].clone()),
        Verdict::Yes,
    ));

    let rank = |h: [&str; 2], base: [f64; 3], chart: &Chart| {
        check_rank_condition_sigma_t(&parse_all(chart, &h), chart, 1, &base, &plan)
            .map(|r| r.verdict)
            .map_err(|e| e.to_string())
    };
    let xw = Chart::new(["x1", "x2", "w"]);
    out.push(verdict_check(
        "rank condition (w, w^2)",
        rank(["w", "w^2"], [0.0, 0.0, 0.3], &xw),
        Verdict::Yes,
    ));
    out.push(verdict_check(
        "rank condition (w, x1)",
        rank(["w", "x1"], [0.0, 0.0, 0.3], &xw),
        Verdict::No,
    ));

    let abelian = |sys: &ControlSystem, vs: [[&str; 3]; 2]| {
        let cands: Vec<SymmetryCandidate> = vs
            .iter()
            .enumerate()
            .map(|(i, v)| SymmetryCandidate::new(format!("v{}", i + 1), field(*v)))
            .collect();
        check_abelian_trivialisation(sys, &cands, &plan)
            .map(|r| r.verdict)
            .map_err(|e| e.to_string())
    };
    let (dx, dy, dw) = (["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]);
    out.push(verdict_check(
        "elliptic: abelian trivialisation by d/dx, d/dy",
        abelian(&elliptic, [dx, dy]),
        Verdict::Yes,
    ));
    out.push(verdict_check(
        "elliptic: d/dx, d/dw are not transversal",
        abelian(&elliptic, [dx, dw]),
        Verdict::No,
    ));
    out.push(verdict_check(
        "elliptic: trivialisable",
        check_trivialisable(&elliptic, &plan, Route::Canonical)
            .map(|r| r.verdict)
            .map_err(|e| e.to_string()),
        Verdict::Yes,
    ));

    for (family, params) in [
        (CatalogFamily::SigmaLambda, vec![("lambda", "1,-1")]),
        (CatalogFamily::SigmaLambda, vec![("lambda", "1,2,3")]),
        (
            CatalogFamily::SigmaLambda0k,
            vec![("k", "2"), ("lambda", "1,3/2")],
        ),
        (
            CatalogFamily::SigmaLambda0k,
            vec![("k", "3"), ("lambda", "1,4/3,2")],
        ),
    ] {
        let name = format!("{}: presentation", label(family, &params));
        let e = generate_with(family, &params).expect("valid parameters");
        let sys = e.spec.build().expect("builds");
        let verdict = e
            .spec
            .presentation()
            .map_err(|e| e.to_string())
            .and_then(|p| p.ok_or_else(|| "no presentation".to_string()))
            .and_then(|p| {
                verify_algebra_presentation(&p, &sys.base, &plan)
                    .map(|r| r.verdict)
                    .map_err(|e| e.to_string())
            });
        out.push(verdict_check(&name, verdict, Verdict::Yes));
    }

    let lam = [2, 1].map(num_rational::Rational64::from_integer);
    out.push(match integrality_constraint(&lam, 2) {
        Err(msg) if msg.contains("< k") => {
            Check::pass("integrality rejects lambda=(2,1), k=2", None).with_note(msg)
        }
        other => error_check(
            "integrality rejects lambda=(2,1), k=2",
            format!("{other:?}"),
        ),
    });
    out.push(expect(
        "generator refuses lambda=(2,1), k=2",
        generate_with(
            CatalogFamily::SigmaLambda0k,
            &[("k", "2"), ("lambda", "2,1")],
        )
        .is_err(),
        || "accepted".into(),
    ));
    out
}

/// Worst absolute residual over several fields, aggregated across trials.
struct Worst {
    name: &'static str,
    tol: f64,
    value: f64,
    witness: Option<Witness>,
    trials: usize,
}

impl Worst {
    fn new(name: &'static str, tol: f64) -> Worst {
        Worst {
            name,
            tol,
            value: 0.0,
            witness: None,
            trials: 0,
        }
    }

    fn record(&mut self, value: f64, point: Vec<f64>, component: usize) {
        if value > self.value || !value.is_finite() {
            self.value = value;
            self.witness = Some(Witness {
                point,
                value,
                component,
            });
        }
    }

    fn field(&mut self, v: &VectorField, base: &[f64], plan: &SamplePlan) {
        self.trials += 1;
        for (i, e) in v.components().iter().enumerate() {
            match max_abs(e, base, plan) {
                Some((m, p)) => self.record(m, p, i),
                None => self.record(f64::INFINITY, base.to_vec(), i),
            }
        }
    }

    fn check(self) -> Check {
        let name = format!("{} ({} trials)", self.name, self.trials);
        if self.value <= self.tol {
            Check::pass(&name, Some(self.value))
        } else {
            Check::fail(
                &name,
                self.witness,
                Some(format!("max residual {:e} > {:e}", self.value, self.tol)),
            )
        }
    }
}

fn calculus(seed: u64) -> Vec<Check> {
    let chart = xyw_chart();
    let base = [0.0; 3];
    let plan = SamplePlan {
        samples: 16,
        ..SamplePlan::default()
    };
    let mut r = rng(seed ^ 0xca1c);
    let mut jacobi = Worst::new("jacobi", 1e-10);
    let mut anti = Worst::new("antisymmetry", 1e-10);
    let mut leibniz = Worst::new("leibniz", 1e-10);
    let mut fd = Worst::new("derivative vs finite difference (relative)", 1e-6);
    let vars: Vec<Expr> = (0..3).map(|i| chart.var(i)).collect();
    for _ in 0..100 {
        let x = random_field(&mut r, &chart, 2);
        let y = random_field(&mut r, &chart, 2);
        let z = random_field(&mut r, &chart, 2);
        let h = crate::random::polynomial(&mut r, &vars, 2, 3);
        let j = &(&lie_bracket(&x, &lie_bracket(&y, &z)) + &lie_bracket(&y, &lie_bracket(&z, &x)))
            + &lie_bracket(&z, &lie_bracket(&x, &y));
        jacobi.field(&j, &base, &plan);
        anti.field(&(&lie_bracket(&x, &y) + &lie_bracket(&y, &x)), &base, &plan);
        let l = &lie_bracket(&x, &y.scale(&h))
            - &(&y.scale(&x.apply(&h)) + &lie_bracket(&x, &y).scale(&h));
        leibniz.field(&l, &base, &plan);

        let [p1, p2, p3] = [0, 1, 2].map(|i| x.component(i).clone());
        let e = p1.sin() * (&p2 / Expr::int(2)).exp() + p3 / (Expr::int(2) + p1.powi(2));
        fd.trials += 1;
        let step = 1e-5;
        for point in plan.points(&base).take(4) {
            for v in 0..3 {
                let d = differentiate(&e, v).eval(&point).expect("smooth");
                let (mut hi, mut lo) = (point.clone(), point.clone());
                hi[v] += step;
                lo[v] -= step;
                let approx =
                    (e.eval(&hi).expect("smooth") - e.eval(&lo).expect("smooth")) / (2.0 * step);
                fd.record((d - approx).abs() / d.abs().max(1.0), point.clone(), v);
            }
        }
    }
    vec![jacobi.check(), anti.check(), leibniz.check(), fd.check()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite() {
        assert!(run_suite("nope", 1).is_none());
    }

    #[test]
    fn symmetry_suite_passes() {
        let r = run_suite("symmetry", 1).unwrap();
        assert_eq!(
            r.verdict,
            Verdict::Yes,
            "{:#?}",
            r.failures().collect::<Vec<_>>()
        );
    }

    #[test]
    fn calculus_suite_passes() {
        let r = run_suite("calculus", 1).unwrap();
        assert_eq!(r.verdict, Verdict::Yes, "{:#?}", r.checks);
    }
}
