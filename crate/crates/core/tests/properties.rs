//! Property tests over random expressions, vector fields and catalog systems.

use std::collections::BTreeMap;

use proptest::prelude::*;
use trivcheck_core::catalog::{generate_with, CatalogFamily};
use trivcheck_core::check::Verdict;
use trivcheck_core::classify::{check_trivialisable, Route};
use trivcheck_core::expr::{with_sharing, Expr, SamplePlan};
use trivcheck_core::feedback::apply_feedback;
use trivcheck_core::geometry::{lie_bracket, Chart, VectorField};
use trivcheck_core::random::{random_feedback, random_field, random_system, rng, xyw_chart};
use trivcheck_core::structure::ControlSystem;
use trivcheck_core::symmetry::{
    check_abelian_trivialisation, is_infinitesimal_symmetry, SymmetryCandidate,
};

const POINTS: [[f64; 3]; 4] = [
    [0.1, 0.2, 0.3],
    [-0.35, 0.4, 0.05],
    [0.45, -0.25, -0.4],
    [0.0, 0.0, 0.0],
];

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[derive(Clone, Debug)]
enum Shape {
    Var(usize),
    Int(i64),
    Ratio(i64, i64),
    Add(Box<Shape>, Box<Shape>),
    Sub(Box<Shape>, Box<Shape>),
    Mul(Box<Shape>, Box<Shape>),
    /// Divides by `2 + b²` so evaluation stays finite.
    Div(Box<Shape>, Box<Shape>),
    Pow(Box<Shape>, u8),
    Neg(Box<Shape>),
    Sin(Box<Shape>),
    Cos(Box<Shape>),
    Exp(Box<Shape>),
}

fn shape() -> impl Strategy<Value = Shape> {
    let leaf = prop_oneof![
        (0usize..3).prop_map(Shape::Var),
        (-5i64..=5).prop_map(Shape::Int),
        (-7i64..=7, 1i64..=6).prop_map(|(n, d)| Shape::Ratio(n, d)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Shape::Add(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Shape::Sub(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Shape::Mul(a.into(), b.into())),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Shape::Div(a.into(), b.into())),
            (inner.clone(), 0u8..4).prop_map(|(a, n)| Shape::Pow(a.into(), n)),
            inner.clone().prop_map(|a| Shape::Neg(a.into())),
            inner.clone().prop_map(|a| Shape::Sin(a.into())),
            inner.clone().prop_map(|a| Shape::Cos(a.into())),
            inner.prop_map(|a| Shape::Exp(a.into())),
        ]
    })
}

fn build(s: &Shape, chart: &Chart) -> Expr {
    match s {
        Shape::Var(i) => chart.var(*i),
        Shape::Int(n) => Expr::int(*n),
        Shape::Ratio(n, d) => Expr::ratio(*n, *d),
        Shape::Add(a, b) => build(a, chart) + build(b, chart),
        Shape::Sub(a, b) => build(a, chart) - build(b, chart),
        Shape::Mul(a, b) => build(a, chart) * build(b, chart),
        Shape::Div(a, b) => build(a, chart) / (Expr::int(2) + build(b, chart).powi(2)),
        Shape::Pow(a, n) => build(a, chart).powi(*n as i64),
        Shape::Neg(a) => -build(a, chart),
        Shape::Sin(a) => build(a, chart).sin(),
        Shape::Cos(a) => build(a, chart).cos(),
        Shape::Exp(a) => (Expr::ratio(1, 4) * build(a, chart)).sin().exp(),
    }
}

fn field(chart: &Chart, comps: [&str; 3]) -> VectorField {
    VectorField::new(
        comps
            .iter()
            .map(|s| chart.parse(s, &BTreeMap::new()).unwrap()),
    )
}

fn max_component(v: &VectorField) -> f64 {
    POINTS
        .iter()
        .flat_map(|p| v.eval(p).unwrap())
        .fold(0.0, |m, x| m.max(x.abs()))
}

fn catalog(family: CatalogFamily, params: &[(&str, &str)]) -> ControlSystem {
    generate_with(family, params).unwrap().spec.build().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printing_then_parsing_preserves_value(s in shape()) {
        let chart = xyw_chart();
        let e = build(&s, &chart);
        let printed = e.to_string();
        let back = chart.parse(&printed, &BTreeMap::new()).unwrap();
        prop_assert_eq!(back.to_string(), printed.clone());
        for p in POINTS {
            let (a, b) = (e.eval(&p).unwrap(), back.eval(&p).unwrap());
            prop_assert!(close(a, b, 1e-12), "{printed}: {a} vs {b}");
        }
    }

    #[test]
    fn sharing_does_not_change_results(s in shape()) {
        let chart = xyw_chart();
        let shared = with_sharing(true, || build(&s, &chart));
        let plain = with_sharing(false, || build(&s, &chart));
        prop_assert_eq!(shared.to_string(), plain.to_string());
        prop_assert!(shared.dag_size() <= plain.dag_size());
        for p in POINTS {
            prop_assert_eq!(shared.eval(&p).unwrap(), plain.eval(&p).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn brackets_satisfy_jacobi_antisymmetry_and_leibniz(seed in any::<u64>(), s in shape()) {
        let chart = xyw_chart();
        let mut r = rng(seed);
        let (x, y, z) = (
            random_field(&mut r, &chart, 2),
            random_field(&mut r, &chart, 2),
            random_field(&mut r, &chart, 2),
        );
        let jacobi = &(&lie_bracket(&x, &lie_bracket(&y, &z)) + &lie_bracket(&y, &lie_bracket(&z, &x)))
            + &lie_bracket(&z, &lie_bracket(&x, &y));
        prop_assert!(max_component(&jacobi) <= 1e-10);
        prop_assert!(max_component(&(&lie_bracket(&x, &y) + &lie_bracket(&y, &x))) <= 1e-10);
        let h = build(&s, &chart);
        let leibniz = &lie_bracket(&x, &y.scale(&h))
            - &(&y.scale(&x.apply(&h)) + &lie_bracket(&x, &y).scale(&h));
        prop_assert!(max_component(&leibniz) <= 1e-9);
    }

    #[test]
    fn brackets_of_symmetries_are_symmetries(
        lambda in prop::sample::select(vec!["1,3/2", "1,-1", "2,1", "1,2"]),
        a in -3i64..=3, b in -3i64..=3, c in -3i64..=3, d in -3i64..=3,
    ) {
        let e = generate_with(CatalogFamily::SigmaLambda, &[("lambda", lambda)]).unwrap();
        let sys = e.spec.build().unwrap();
        let gens = e.spec.presentation().unwrap().unwrap().generators;
        let plan = SamplePlan::default();
        let combo = |p: i64, q: i64, i: usize, j: usize| {
            &gens[i].scale(&Expr::int(p)) + &gens[j].scale(&Expr::int(q))
        };
        let (v1, v2) = (combo(a, b, 0, 2), combo(c, d, 1, 2));
        for v in [v1.clone(), v2.clone(), lie_bracket(&v1, &v2)] {
            let rep = is_infinitesimal_symmetry(&sys, &SymmetryCandidate::new("v", v), &plan).unwrap();
            prop_assert_eq!(rep.verdict, Verdict::Yes);
        }
    }

    #[test]
    fn symmetry_verdicts_survive_feedback(seed in any::<u64>()) {
        let plan = SamplePlan::default();
        let chart = xyw_chart();
        let mut r = rng(seed);
        let elliptic = catalog(CatalogFamily::CompletelyFlat, &[("eps", "-1")]);
        let random = random_system(&mut r, &plan);
        let candidates = [
            field(&chart, ["1", "0", "0"]),
            field(&chart, ["0", "1", "0"]),
            field(&chart, ["x", "0", "0"]),
            field(&chart, ["-y", "x", "1"]),
            random_field(&mut r, &chart, 1),
        ];
        for sys in [elliptic, random] {
            let t = random_feedback(&mut r, &sys, &plan);
            let moved = apply_feedback(&sys, &t, &plan).unwrap();
            for v in &candidates {
                let cand = SymmetryCandidate::new("v", v.clone());
                let before = is_infinitesimal_symmetry(&sys, &cand, &plan).unwrap().verdict;
                let after = is_infinitesimal_symmetry(&moved, &cand, &plan).unwrap().verdict;
                prop_assert_eq!(before, after);
            }
        }
    }

    #[test]
    fn abelian_certificate_implies_trivialisable(
        pick in 0usize..4,
        eps in prop::sample::select(vec!["-1", "1"]),
        nu in prop::sample::select(vec!["0", "1", "2", "5/2"]),
        ab in prop::sample::select(vec![("1", "2"), ("1", "-1"), ("-2", "1/3"), ("3/2", "1/2")]),
    ) {
        let sys = match pick {
            0 => catalog(CatalogFamily::Trivial, &[("a", ab.0), ("b", ab.1)]),
            1 => catalog(CatalogFamily::SigmaT1, &[("eps", eps), ("nu", nu)]),
            2 => catalog(CatalogFamily::CentroFlatConstant, &[("eps", eps), ("nu", nu)]),
            _ => catalog(CatalogFamily::CompletelyFlat, &[("eps", eps)]),
        };
        let chart = xyw_chart();
        let plan = SamplePlan::default();
        let cands = [
            SymmetryCandidate::new("v1", field(&chart, ["1", "0", "0"])),
            SymmetryCandidate::new("v2", field(&chart, ["0", "1", "0"])),
        ];
        let abelian = check_abelian_trivialisation(&sys, &cands, &plan).unwrap();
        prop_assert_eq!(abelian.verdict, Verdict::Yes);
        let triv = check_trivialisable(&sys, &plan, Route::Canonical).unwrap();
        prop_assert_eq!(triv.verdict, Verdict::Yes);
    }
}
