//! Local trivialisability and the flat / centro-flat family lattice.
//!
//! A system is locally trivialisable iff, for its canonical pair,
//! `κ ≡ 0`, `L_{f_c} ν ≡ 0` and `L_{[f_c,g_c]} ν ≡ 0`.

use serde::{Deserialize, Serialize};

use crate::check::{Check, Outcome, Verdict};
use crate::expr::{differentiate, is_identically_zero, Expr, SamplePlan};
use crate::geometry::{decompose_in_frame, lie_bracket, Frame, VectorField};
use crate::invariants::{
    canonicalize, compute_invariants, direct_kappa_nu, sign_on_box, CanonicalPair, InvariantError,
    InvariantTriple, Mode,
};
use crate::structure::{compute_structure_functions, ControlSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Recompute the canonical pair's structure functions.
    Canonical,
    /// Closed-form κ and ν with `f_c = f + g k3`, `g_c = |λ1|^(-1/2) g` built directly.
    Raw,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrivialisabilityReport {
    pub verdict: Verdict,
    pub route: Route,
    pub checks: Vec<Check>,
}

pub const TRIVIALISABILITY_NAMES: [&str; 3] =
    ["kappa_zero", "lie_fc_nu_zero", "lie_bracket_nu_zero"];

fn trivialisability_checks(
    kappa: &Expr,
    nu: &Expr,
    f_c: &VectorField,
    g_c: &VectorField,
    base: &[f64],
    plan: &SamplePlan,
) -> Vec<Check> {
    let bracket = lie_bracket(f_c, g_c);
    let exprs = [kappa.clone(), f_c.apply(nu), bracket.apply(nu)];
    TRIVIALISABILITY_NAMES
        .iter()
        .zip(exprs)
        .map(|(name, e)| Check::zero(name, &is_identically_zero(&[e], base, plan)))
        .collect()
}

pub fn check_trivialisable(
    sys: &ControlSystem,
    plan: &SamplePlan,
    route: Route,
) -> Result<TrivialisabilityReport, InvariantError> {
    let checks = match route {
        Route::Canonical => {
            let cp = canonicalize(sys, plan)?;
            trivialisability_checks(&cp.kappa, &cp.nu, &cp.f_c, &cp.g_c, &sys.base, plan)
        }
        Route::Raw => {
            let sf = compute_structure_functions(sys, plan)?;
            let g = sys.single_input()?;
            sign_on_box(&sf.lambda[0], &sys.base, plan)?;
            let (kappa, nu) = direct_kappa_nu(&sf, &sys.f, g);
            let f_c = &sys.f + &g.scale(&sf.k[2]);
            let g_c = g.scale(&sf.lambda[0].abs().pow_ratio(-1, 2));
            trivialisability_checks(&kappa, &nu, &f_c, &g_c, &sys.base, plan)
        }
    };
    Ok(TrivialisabilityReport {
        verdict: Verdict::all(&checks),
        route,
        checks,
    })
}

/// The families of flat and centro-flat systems, most specific first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    CompletelyFlat,
    CentroFlatConstant,
    FlatConstant,
    Flat,
    CentroFlat,
    None,
    Inconclusive,
}

impl Family {
    pub fn id(self) -> &'static str {
        match self {
            Family::CompletelyFlat => "completely-flat",
            Family::CentroFlatConstant => "centro-flat-constant",
            Family::FlatConstant => "flat-constant",
            Family::Flat => "flat",
            Family::CentroFlat => "centro-flat",
            Family::None => "none",
            Family::Inconclusive => "inconclusive",
        }
    }

    pub fn from_id(id: &str) -> Option<Family> {
        [
            Family::CompletelyFlat,
            Family::CentroFlatConstant,
            Family::FlatConstant,
            Family::Flat,
            Family::CentroFlat,
            Family::None,
            Family::Inconclusive,
        ]
        .into_iter()
        .find(|f| f.id() == id)
    }

    /// Most specific family satisfied by the four predicates.
    pub fn from_predicates(
        kappa_zero: bool,
        nu_zero: bool,
        kappa_const: bool,
        nu_const: bool,
    ) -> Family {
        match (kappa_zero, nu_zero) {
            (true, true) => Family::CompletelyFlat,
            (true, false) if nu_const => Family::CentroFlatConstant,
            (false, true) if kappa_const => Family::FlatConstant,
            (true, false) => Family::Flat,
            (false, true) => Family::CentroFlat,
            (false, false) => Family::None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyPredicates {
    pub kappa_zero: Check,
    pub nu_zero: Check,
    pub kappa_constant: Check,
    pub nu_constant: Check,
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub invariants: InvariantTriple,
    pub trivialisable: TrivialisabilityReport,
    pub predicates: FamilyPredicates,
    pub family: Family,
    /// Constant κ and ν must have κν ≡ 0; a failure here is an internal inconsistency.
    pub consistency: Option<Check>,
}

/// All first partials vanish.
fn constant_check(name: &str, e: &Expr, dim: usize, base: &[f64], plan: &SamplePlan) -> Check {
    let partials: Vec<Expr> = (0..dim).map(|j| differentiate(e, j)).collect();
    Check::zero(name, &is_identically_zero(&partials, base, plan))
}

pub fn classify_family(
    sys: &ControlSystem,
    plan: &SamplePlan,
) -> Result<Classification, InvariantError> {
    let invariants = compute_invariants(sys, plan, Mode::ViaCanonical)?;
    let trivialisable = check_trivialisable(sys, plan, Route::Canonical)?;
    let (base, n) = (&sys.base, sys.dim());
    let predicates = FamilyPredicates {
        kappa_zero: Check::zero(
            "kappa_zero",
            &is_identically_zero(std::slice::from_ref(&invariants.kappa), base, plan),
        ),
        nu_zero: Check::zero(
            "nu_zero",
            &is_identically_zero(std::slice::from_ref(&invariants.nu), base, plan),
        ),
        kappa_constant: constant_check("kappa_constant", &invariants.kappa, n, base, plan),
        nu_constant: constant_check("nu_constant", &invariants.nu, n, base, plan),
    };
    let all = [
        &predicates.kappa_zero,
        &predicates.nu_zero,
        &predicates.kappa_constant,
        &predicates.nu_constant,
    ];
    let family = if all.iter().any(|c| c.outcome == Outcome::Inconclusive) {
        Family::Inconclusive
    } else {
        Family::from_predicates(
            predicates.kappa_zero.passed(),
            predicates.nu_zero.passed(),
            predicates.kappa_constant.passed(),
            predicates.nu_constant.passed(),
        )
    };
    let consistency =
        (predicates.kappa_constant.passed() && predicates.nu_constant.passed()).then(|| {
            let product = &invariants.kappa * &invariants.nu;
            Check::zero(
                "kappa_nu_product_zero",
                &is_identically_zero(&[product], base, plan),
            )
        });
    Ok(Classification {
        invariants,
        trivialisable,
        predicates,
        family,
        consistency,
    })
}

pub const RECTIFIABILITY_NAMES: [&str; 3] = [
    "fc_commutes_with_bracket",
    "bracket_tangent_to_span",
    "bracket_closure",
];

/// The three integrability conditions for simultaneously rectifying
/// `span(f_c, [g_c,f_c])` and `g_c`:
///
/// 1. `[f_c,[g_c,f_c]] ≡ 0`;
/// 2. `[f_c,g_c]` has no `g_c` component in the frame `(f_c, [g_c,f_c], g_c)`;
/// 3. `[[g_c,f_c],g_c] + ε f_c + ν [g_c,f_c] ≡ 0`.
pub fn check_rectifiability_conditions(
    cp: &CanonicalPair,
    base: &[f64],
    plan: &SamplePlan,
) -> Vec<Check> {
    let (f, g) = (&cp.f_c, &cp.g_c);
    let gf = lie_bracket(g, f);
    let c1 = Check::zero(
        RECTIFIABILITY_NAMES[0],
        &lie_bracket(f, &gf).is_identically_zero(base, plan),
    );
    let frame = Frame::new(vec![f.clone(), gf.clone(), g.clone()]);
    let c2 = match decompose_in_frame(&lie_bracket(f, g), &frame, base, plan) {
        Ok(d) => Check::zero(
            RECTIFIABILITY_NAMES[1],
            &is_identically_zero(&d.coefficients[2..], base, plan),
        ),
        Err(e) => Check::fail(RECTIFIABILITY_NAMES[1], None, Some(e.to_string())),
    };
    let eps = Expr::int(cp.epsilon as i64);
    let closure = &(&lie_bracket(&gf, g) + &f.scale(&eps)) + &gf.scale(&cp.nu);
    let c3 = Check::zero(
        RECTIFIABILITY_NAMES[2],
        &closure.is_identically_zero(base, plan),
    );
    vec![c1, c2, c3]
}
