//! The canonical pair and the feedback invariants (ε, κ, ν).
//!
//! With `f_c = f + g k3` and `g_c = |λ1|^(-1/2) g` the recomputed structure
//! functions satisfy `k3 = k2 = 0`, `λ1 = ε = ±1`, and then
//!
//! ```text
//! [f_c,[f_c,g_c]] = κ g_c
//! [g_c,[g_c,f_c]] = ε f_c + μ g_c + ν [g_c,f_c]
//! ```

use serde::Serialize;
use thiserror::Error;

use crate::check::Check;
use crate::expr::{is_identically_zero, Expr, SamplePlan, Witness};
use crate::feedback::FeedbackTransform;
use crate::geometry::{lie_bracket, VectorField};
use crate::structure::{
    compute_structure_functions, structure_functions_unchecked, ControlSystem, StructureError,
    StructureFunctions,
};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum InvariantError {
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("lambda1 changes sign or vanishes on the sampling box (value {} at {:?})", .0.value, .0.point)]
    SignChange(Witness),
    #[error("{what} could not be evaluated on enough samples")]
    Inconclusive { what: &'static str },
    #[error("canonical pair check `{}` failed", .0.name)]
    NotCanonical(Box<Check>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Direct,
    ViaCanonical,
}

/// A canonical representative `(f_c, g_c)` with its recomputed structure.
#[derive(Clone, Debug)]
pub struct CanonicalPair {
    pub f_c: VectorField,
    pub g_c: VectorField,
    pub epsilon: i8,
    /// κ = k̃1.
    pub kappa: Expr,
    /// μ = λ̃2.
    pub mu: Expr,
    /// ν = λ̃3, with the sign fixed by the chosen `g_c`.
    pub nu: Expr,
    /// The feedback that produced the pair from the original system.
    pub transform: FeedbackTransform,
    pub structure: StructureFunctions,
    /// Recomputation checks: k̃3 ≡ 0, k̃2 ≡ 0, λ̃1 ≡ ε.
    pub checks: Vec<Check>,
}

/// (ε, κ, ν) with ν normalised up to its global sign.
#[derive(Clone, Debug)]
pub struct InvariantTriple {
    pub epsilon: i8,
    pub kappa: Expr,
    pub nu: Expr,
    /// True when ν was negated to satisfy the sign convention.
    pub nu_flipped: bool,
    pub nu_convention: &'static str,
}

pub const NU_CONVENTION: &str =
    "nu is defined up to a global sign; the sign is chosen so that nu(base) >= 0, or, \
     if nu(base) = 0, so that the first non-zero sample is positive";

/// Sign of `e` on the box; fails with a witness if it changes sign or vanishes.
pub fn sign_on_box(e: &Expr, base: &[f64], plan: &SamplePlan) -> Result<i8, InvariantError> {
    let sampled = plan.evaluate(std::slice::from_ref(e), base);
    if sampled.is_inconclusive() || sampled.samples.is_empty() {
        return Err(InvariantError::Inconclusive { what: "lambda1" });
    }
    let first = &sampled.samples[0];
    let sign = if first.values[0] > 0.0 { 1 } else { -1 };
    for s in &sampled.samples {
        let v = s.values[0];
        if v.abs() <= plan.tolerance(s.scales[0]) || (v > 0.0) != (sign > 0) {
            return Err(InvariantError::SignChange(Witness {
                point: s.point.clone(),
                value: v,
                component: 0,
            }));
        }
    }
    Ok(sign)
}

/// The feedback `α = k3`, `β = |λ1|^(-1/2)`.
pub fn canonical_feedback(sf: &StructureFunctions) -> FeedbackTransform {
    FeedbackTransform::new(sf.k[2].clone(), sf.lambda[0].abs().pow_ratio(-1, 2))
}

/// Builds the canonical pair and verifies it by recomputing its structure functions.
pub fn canonicalize(
    sys: &ControlSystem,
    plan: &SamplePlan,
) -> Result<CanonicalPair, InvariantError> {
    let sf = compute_structure_functions(sys, plan)?;
    let g = sys.single_input()?;
    let epsilon = sign_on_box(&sf.lambda[0], &sys.base, plan)?;
    let t = canonical_feedback(&sf);
    let f_c = &sys.f + &g.scale(&t.alpha);
    let g_c = g.scale(&t.beta);
    let canon = sys.with_fields(f_c.clone(), g_c.clone());
    let structure = structure_functions_unchecked(&canon, plan)?;
    let eps = Expr::int(epsilon as i64);
    let zero = |name: &str, e: Expr| Check::zero(name, &is_identically_zero(&[e], &sys.base, plan));
    let checks = vec![
        zero("k3_vanishes", structure.k[2].clone()),
        zero("k2_vanishes", structure.k[1].clone()),
        zero("lambda1_is_epsilon", &structure.lambda[0] - &eps),
    ];
    if let Some(bad) = checks.iter().find(|c| !c.passed()) {
        return Err(InvariantError::NotCanonical(Box::new(bad.clone())));
    }
    Ok(CanonicalPair {
        f_c,
        g_c,
        epsilon,
        kappa: structure.k[0].clone(),
        mu: structure.lambda[1].clone(),
        nu: structure.lambda[2].clone(),
        transform: t,
        structure,
        checks,
    })
}

/// κ and ν from the raw structure functions:
///
/// ```text
/// κ = k1 + ½ L_f(k2 − L_g k3) + ¼ (k2 − L_g k3)² + L_[g,f] k3 + ½ k3 L_g(k2 − L_g k3)
/// ν = |λ1|^(-1/2) (λ3 − ½ L_g ln|λ1|)
/// ```
pub fn direct_kappa_nu(sf: &StructureFunctions, f: &VectorField, g: &VectorField) -> (Expr, Expr) {
    let [k1, k2, k3] = &sf.k;
    let [l1, _, l3] = &sf.lambda;
    let gf = lie_bracket(g, f);
    let half = Expr::ratio(1, 2);
    let d = k2 - g.apply(k3);
    let kappa = k1
        + &half * f.apply(&d)
        + Expr::ratio(1, 4) * d.powi(2)
        + gf.apply(k3)
        + &half * k3 * g.apply(&d);
    let nu = l1.abs().pow_ratio(-1, 2) * (l3 - &half * (g.apply(l1) / l1));
    (kappa, nu)
}

/// Sign making ν(base) ≥ 0 (or the first clearly non-zero sample positive).
pub fn nu_sign(nu: &Expr, base: &[f64], plan: &SamplePlan) -> Result<bool, InvariantError> {
    if nu.is_zero() {
        return Ok(false);
    }
    let sampled = plan.evaluate(std::slice::from_ref(nu), base);
    if sampled.is_inconclusive() {
        return Err(InvariantError::Inconclusive { what: "nu" });
    }
    for s in &sampled.samples {
        let v = s.values[0];
        if v.abs() > plan.tolerance(s.scales[0]) {
            return Ok(v < 0.0);
        }
    }
    Ok(false)
}

fn normalise(
    epsilon: i8,
    kappa: Expr,
    nu: Expr,
    base: &[f64],
    plan: &SamplePlan,
) -> Result<InvariantTriple, InvariantError> {
    let flip = nu_sign(&nu, base, plan)?;
    Ok(InvariantTriple {
        epsilon,
        kappa,
        nu: if flip { -nu } else { nu },
        nu_flipped: flip,
        nu_convention: NU_CONVENTION,
    })
}

/// (ε, κ, ν) by the chosen route; ν is sign-normalised.
pub fn compute_invariants(
    sys: &ControlSystem,
    plan: &SamplePlan,
    mode: Mode,
) -> Result<InvariantTriple, InvariantError> {
    match mode {
        Mode::ViaCanonical => {
            let cp = canonicalize(sys, plan)?;
            normalise(cp.epsilon, cp.kappa, cp.nu, &sys.base, plan)
        }
        Mode::Direct => {
            let sf = compute_structure_functions(sys, plan)?;
            let g = sys.single_input()?;
            let epsilon = sign_on_box(&sf.lambda[0], &sys.base, plan)?;
            let (kappa, nu) = direct_kappa_nu(&sf, &sys.f, g);
            normalise(epsilon, kappa, nu, &sys.base, plan)
        }
    }
}

/// Checks that both routes give the same κ and ν.
pub fn compare_modes(
    sys: &ControlSystem,
    plan: &SamplePlan,
) -> Result<(InvariantTriple, InvariantTriple, Vec<Check>), InvariantError> {
    let direct = compute_invariants(sys, plan, Mode::Direct)?;
    let canon = compute_invariants(sys, plan, Mode::ViaCanonical)?;
    let checks = vec![
        Check::zero(
            "kappa_modes_agree",
            &is_identically_zero(&[&direct.kappa - &canon.kappa], &sys.base, plan),
        ),
        Check::zero(
            "nu_modes_agree",
            &is_identically_zero(&[&direct.nu - &canon.nu], &sys.base, plan),
        ),
        Check::pass("epsilon_modes_agree", None),
    ];
    let checks = if direct.epsilon == canon.epsilon {
        checks
    } else {
        let mut c = checks;
        c[2] = Check::fail(
            "epsilon_modes_agree",
            None,
            Some(format!("{} vs {}", direct.epsilon, canon.epsilon)),
        );
        c
    };
    Ok((direct, canon, checks))
}

pub const KAPPA_NU_NAMES: [&str; 3] = ["curvature_transport", "mu_transport", "mu_definition"];

/// Residuals of
///
/// ```text
/// L²_{f_c} ν − ν κ + L_{g_c} κ = 0
/// L_{f_c} μ − ν κ + L_{g_c} κ  = 0
/// L_{f_c} ν − μ                = 0
/// ```
pub fn kappa_nu_residuals(cp: &CanonicalPair) -> [Expr; 3] {
    let (f, g) = (&cp.f_c, &cp.g_c);
    let nk = &cp.nu * &cp.kappa;
    let lg_k = g.apply(&cp.kappa);
    let lf_nu = f.apply(&cp.nu);
    [
        f.apply(&lf_nu) - &nk + &lg_k,
        f.apply(&cp.mu) - &nk + &lg_k,
        lf_nu - &cp.mu,
    ]
}

pub fn verify_kappa_nu_relation(cp: &CanonicalPair, base: &[f64], plan: &SamplePlan) -> Vec<Check> {
    KAPPA_NU_NAMES
        .iter()
        .zip(kappa_nu_residuals(cp))
        .map(|(name, r)| Check::zero(name, &is_identically_zero(&[r], base, plan)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::tests::system;

    fn at(e: &Expr, p: &[f64]) -> f64 {
        e.eval(p).unwrap()
    }

    #[test]
    fn elliptic_and_hyperbolic() {
        let plan = SamplePlan::default();
        let p = [0.1, 0.2, 0.3];
        for (f, eps) in [
            (["cos(w)", "sin(w)", "0"], -1),
            (["cosh(w)", "sinh(w)", "0"], 1),
        ] {
            let sys = system(f, ["0", "0", "1"], [0.0; 3]);
            for mode in [Mode::Direct, Mode::ViaCanonical] {
                let inv = compute_invariants(&sys, &plan, mode).unwrap();
                assert_eq!(inv.epsilon, eps);
                assert!(at(&inv.kappa, &p).abs() < 1e-12);
                assert!(at(&inv.nu, &p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exponential_pair() {
        let plan = SamplePlan::default();
        let sys = system(["exp(w)", "exp(2*w)", "0"], ["0", "0", "1"], [0.0; 3]);
        let cp = canonicalize(&sys, &plan).unwrap();
        assert!((at(cp.g_c.component(2), &[0.0; 3]) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((at(&cp.structure.lambda[0], &[0.3, 0.1, 0.2]) + 1.0).abs() < 1e-12);
        let (d, c, checks) = compare_modes(&sys, &plan).unwrap();
        assert!(checks.iter().all(Check::passed), "{checks:?}");
        for inv in [d, c] {
            assert_eq!(inv.epsilon, -1);
            assert!(at(&inv.kappa, &[0.1, 0.2, 0.3]).abs() < 1e-10);
            assert!((at(&inv.nu, &[0.1, 0.2, 0.3]) - 3.0 / 2f64.sqrt()).abs() < 1e-10);
        }
        assert!(verify_kappa_nu_relation(&cp, &sys.base, &plan)
            .iter()
            .all(Check::passed));
    }

    #[test]
    fn k3_free_reduction() {
        // After the feedback α = k3 the system is semi-canonical, and the curvature
        // reduces to k1 + ½ L_f k2 + ¼ k2².
        let plan = SamplePlan::default();
        let sys = system(
            ["1 + y*w", "x + w^2", "y/3"],
            ["0", "x/5", "1"],
            [0.1, 0.2, 0.0],
        );
        let sf = compute_structure_functions(&sys, &plan).unwrap();
        let t = FeedbackTransform::new(sf.k[2].clone(), Expr::one());
        let semi = crate::feedback::apply_feedback(&sys, &t, &plan).unwrap();
        let sf_s = compute_structure_functions(&semi, &plan).unwrap();
        assert!(is_identically_zero(&[sf_s.k[2].clone()], &sys.base, &plan).is_zero());
        let [k1, k2, _] = &sf_s.k;
        let reduced = k1 + Expr::ratio(1, 2) * semi.f.apply(k2) + Expr::ratio(1, 4) * k2.powi(2);
        let (kappa, _) = direct_kappa_nu(&sf, &sys.f, sys.single_input().unwrap());
        assert!(is_identically_zero(&[kappa - reduced], &sys.base, &plan).is_zero());
    }

    #[test]
    fn sign_change_is_refused() {
        let plan = SamplePlan::default();
        let x = Expr::var(0, "x");
        assert!(matches!(
            sign_on_box(&x, &[0.0; 3], &plan),
            Err(InvariantError::SignChange(_))
        ));
        assert_eq!(
            sign_on_box(&(x - Expr::int(2)), &[0.0; 3], &plan).unwrap(),
            -1
        );
    }
}
