//! Normal forms as concrete systems with machine-checkable expected results.
//!
//! Every entry is a [`SystemSpec`]: expression strings over a chart, named
//! numeric parameters and an expected block. Catalog parameters are given as
//! strings; all are exact numbers except `nu` for `sigma-t2` (an expression in
//! `w`) and `r` for `centro-flat` (an expression in `x`, `y`).

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::check::Verdict;
use crate::classify::Family;
use crate::expr::{differentiate, is_identically_zero, Expr, SamplePlan, Scalar};
use crate::geometry::Chart;
use crate::symmetry::integrality_constraint;
use crate::sysfile::{
    parse_scalar, AlmostAbelianSpec, BracketSpec, Expected, GeneratorSpec, PresentationSpec,
    SystemSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CatalogFamily {
    /// `ẋ = e^(aw)`, `ẏ = e^(bw)`, `ẇ = u`.
    Trivial,
    /// Canonical trivial form with constant ν: `F'' = ν F' + ε F`, `ẇ = u`.
    SigmaT1,
    /// `ẋ = 1 + εyu`, `ẏ = (x − ν(w)y)u`, `ẇ = u`.
    SigmaT2,
    /// κ = 0 with ν = ν1 x + ν0 for constant ν1, ν0.
    Flat,
    /// ν = 0 with a conformal factor `r(x, y)`.
    CentroFlat,
    /// κ = 0, ν constant; four subcases by ε and ν.
    CentroFlatConstant,
    /// ν = 0, κ constant.
    FlatConstant,
    /// κ = ν = 0.
    CompletelyFlat,
    /// `ẋ_i = η_i (w+1)^λ_i`, `ẇ = u`.
    SigmaLambda,
    /// `ẋ_1 = w^k`, `ẋ_i = η_i w^(kλ_i/λ_1)`, `ẇ = u`.
    SigmaLambda0k,
}

impl CatalogFamily {
    pub const ALL: [CatalogFamily; 10] = [
        CatalogFamily::Trivial,
        CatalogFamily::SigmaT1,
        CatalogFamily::SigmaT2,
        CatalogFamily::Flat,
        CatalogFamily::CentroFlat,
        CatalogFamily::CentroFlatConstant,
        CatalogFamily::FlatConstant,
        CatalogFamily::CompletelyFlat,
        CatalogFamily::SigmaLambda,
        CatalogFamily::SigmaLambda0k,
    ];

    pub fn id(self) -> &'static str {
        match self {
            CatalogFamily::Trivial => "trivial",
            CatalogFamily::SigmaT1 => "sigma-t1",
            CatalogFamily::SigmaT2 => "sigma-t2",
            CatalogFamily::Flat => "flat",
            CatalogFamily::CentroFlat => "centro-flat",
            CatalogFamily::CentroFlatConstant => "centro-flat-constant",
            CatalogFamily::FlatConstant => "flat-constant",
            CatalogFamily::CompletelyFlat => "completely-flat",
            CatalogFamily::SigmaLambda => "sigma-lambda",
            CatalogFamily::SigmaLambda0k => "sigma-lambda-0k",
        }
    }

    pub fn from_id(id: &str) -> Option<CatalogFamily> {
        CatalogFamily::ALL.into_iter().find(|f| f.id() == id)
    }

    /// Accepted parameter names.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            CatalogFamily::Trivial => &["a", "b"],
            CatalogFamily::SigmaT1 => &["eps", "nu"],
            CatalogFamily::SigmaT2 => &["eps", "nu"],
            CatalogFamily::Flat => &["eps", "nu1", "nu0"],
            CatalogFamily::CentroFlat => &["eps", "r"],
            CatalogFamily::CentroFlatConstant => &["eps", "nu"],
            CatalogFamily::FlatConstant => &["eps", "kappa"],
            CatalogFamily::CompletelyFlat => &["eps"],
            CatalogFamily::SigmaLambda => &["lambda", "eta"],
            CatalogFamily::SigmaLambda0k => &["k", "lambda", "eta"],
        }
    }
}

impl CatalogFamily {
    /// Whether generated systems are canonical pairs (`k3 = k2 = 0`, `λ1 = ε`).
    pub fn is_canonical(self) -> bool {
        !matches!(
            self,
            CatalogFamily::Trivial | CatalogFamily::SigmaLambda | CatalogFamily::SigmaLambda0k
        )
    }
}

impl fmt::Display for CatalogFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("{family}: unknown parameter `{name}` (accepted: {accepted})")]
    UnknownParam {
        family: CatalogFamily,
        name: String,
        accepted: String,
    },
    #[error("{family}: parameter `{name}` = `{value}` is not {what}")]
    BadValue {
        family: CatalogFamily,
        name: String,
        value: String,
        what: &'static str,
    },
    #[error("{family}: constraint violated: {constraint}")]
    Constraint {
        family: CatalogFamily,
        constraint: String,
    },
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub family: CatalogFamily,
    pub spec: SystemSpec,
}

impl CatalogEntry {
    pub fn expected(&self) -> &Expected {
        self.spec
            .expected
            .as_ref()
            .expect("catalog entries carry expectations")
    }
}

struct Reader<'a> {
    family: CatalogFamily,
    params: &'a BTreeMap<String, String>,
}

impl Reader<'_> {
    fn raw(&self, name: &str) -> Option<&str> {
        self.params.get(name).map(String::as_str)
    }

    fn bad(&self, name: &str, value: &str, what: &'static str) -> CatalogError {
        CatalogError::BadValue {
            family: self.family,
            name: name.into(),
            value: value.into(),
            what,
        }
    }

    fn constraint(&self, c: impl Into<String>) -> CatalogError {
        CatalogError::Constraint {
            family: self.family,
            constraint: c.into(),
        }
    }

    fn rational(&self, name: &str, default: Rational64) -> Result<Rational64, CatalogError> {
        match self.raw(name) {
            None => Ok(default),
            Some(v) => parse_scalar(v)
                .and_then(Scalar::as_rational)
                .ok_or_else(|| self.bad(name, v, "an exact rational number")),
        }
    }

    fn eps(&self) -> Result<i64, CatalogError> {
        let e = self.rational("eps", Rational64::from_integer(-1))?;
        match e.to_integer() {
            -1 | 1 if e.is_integer() => Ok(e.to_integer()),
            _ => Err(self.constraint(format!("eps = {e} must be -1 or +1"))),
        }
    }

    fn list(&self, name: &str) -> Result<Option<Vec<Rational64>>, CatalogError> {
        let Some(v) = self.raw(name) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                parse_scalar(s.trim())
                    .and_then(Scalar::as_rational)
                    .ok_or_else(|| self.bad(name, v, "a comma-separated list of rationals"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

fn q(r: Rational64) -> String {
    Scalar::Rational(r).to_string()
}

fn int(v: i64) -> Rational64 {
    Rational64::from_integer(v)
}

/// `(c_ε, s_ε)`: `(cos, sin)` for ε = −1, `(cosh, sinh)` for ε = +1.
fn trig(eps: i64) -> (&'static str, &'static str) {
    if eps < 0 {
        ("cos(w)", "sin(w)")
    } else {
        ("cosh(w)", "sinh(w)")
    }
}

fn xyw() -> Vec<String> {
    ["x", "y", "w"].map(String::from).to_vec()
}

fn strings<const N: usize>(s: [&str; N]) -> Vec<String> {
    s.map(String::from).to_vec()
}

struct Expect {
    epsilon: i64,
    kappa: String,
    nu: String,
    family: Family,
    trivialisable: bool,
}

/// Family of a system with κ = 0 and constant ν.
fn kappa_zero_constant_nu(nu_zero: bool) -> Family {
    if nu_zero {
        Family::CompletelyFlat
    } else {
        Family::CentroFlatConstant
    }
}

fn expected(cat: CatalogFamily, e: Expect) -> Expected {
    Expected {
        catalog: Some(cat.id().into()),
        assumptions: true,
        epsilon: Some(e.epsilon as i8),
        kappa: Some(e.kappa),
        nu: Some(e.nu),
        trivialisable: Some(Verdict::from_bool(e.trivialisable)),
        family: Some(e.family),
        symmetry: None,
    }
}

/// `∂x, ∂y` on the `(x, y, w)` chart: commuting symmetries of any system
/// whose fields do not depend on `x`, `y`.
fn translations() -> PresentationSpec {
    PresentationSpec {
        generators: vec![
            GeneratorSpec {
                label: "v1".into(),
                components: strings(["1", "0", "0"]),
            },
            GeneratorSpec {
                label: "v2".into(),
                components: strings(["0", "1", "0"]),
            },
        ],
        table: vec![],
        almost_abelian: None,
    }
}

pub fn generate(
    family: CatalogFamily,
    params: &BTreeMap<String, String>,
) -> Result<CatalogEntry, CatalogError> {
    for name in params.keys() {
        if !family.params().contains(&name.as_str()) {
            return Err(CatalogError::UnknownParam {
                family,
                name: name.clone(),
                accepted: family.params().join(", "),
            });
        }
    }
    let r = Reader { family, params };
    let spec = match family {
        CatalogFamily::Trivial => trivial(&r)?,
        CatalogFamily::SigmaT1 => sigma_t1(&r)?,
        CatalogFamily::SigmaT2 => sigma_t2(&r)?,
        CatalogFamily::Flat => flat(&r)?,
        CatalogFamily::CentroFlat => centro_flat(&r)?,
        CatalogFamily::CentroFlatConstant => centro_flat_constant(&r)?,
        CatalogFamily::FlatConstant => flat_constant(&r)?,
        CatalogFamily::CompletelyFlat => completely_flat(&r)?,
        CatalogFamily::SigmaLambda => sigma_lambda(&r)?,
        CatalogFamily::SigmaLambda0k => sigma_lambda_0k(&r)?,
    };
    Ok(CatalogEntry { family, spec })
}

/// Convenience wrapper taking `(name, value)` pairs.
pub fn generate_with(
    family: CatalogFamily,
    params: &[(&str, &str)],
) -> Result<CatalogEntry, CatalogError> {
    let map = params
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    generate(family, &map)
}

fn trivial(r: &Reader) -> Result<SystemSpec, CatalogError> {
    let a = r.rational("a", int(1))?;
    let b = r.rational("b", int(2))?;
    if a.is_zero() || b.is_zero() || a == b {
        return Err(r.constraint(format!("a = {a}, b = {b} must be non-zero and distinct")));
    }
    // λ1 = −ab, λ3 = a + b, both constant.
    let epsilon = if (a * b).is_positive() { -1 } else { 1 };
    let mut e = expected(
        CatalogFamily::Trivial,
        Expect {
            epsilon,
            kappa: "0".into(),
            nu: "abs(a + b)/sqrt(abs(a*b))".into(),
            family: kappa_zero_constant_nu((a + b).is_zero()),
            trivialisable: true,
        },
    );
    e.symmetry = Some(translations());
    Ok(SystemSpec {
        vars: xyw(),
        f: strings(["exp(a*w)", "exp(b*w)", "0"]),
        g: vec![strings(["0", "0", "1"])],
        base: vec![0.0; 3],
        plan: None,
        params: [("a", a), ("b", b)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), q(v)))
            .collect(),
        expected: Some(e),
    })
}

/// Solutions of `F'' = ν F' + ε F` spanning the plane, as expression strings.
fn sigma_t1_pair(eps: i64, nu: Rational64) -> [&'static str; 2] {
    let disc = nu * nu + int(4 * eps);
    if disc.is_positive() {
        [
            "exp((nu + sqrt(nu^2 + 4*eps))*w/2)",
            "exp((nu - sqrt(nu^2 + 4*eps))*w/2)",
        ]
    } else if disc.is_zero() {
        ["exp(nu*w/2)", "w*exp(nu*w/2)"]
    } else {
        [
            "exp(nu*w/2)*cos(sqrt(-4*eps - nu^2)*w/2)",
            "exp(nu*w/2)*sin(sqrt(-4*eps - nu^2)*w/2)",
        ]
    }
}

fn nonnegative_nu(r: &Reader, default: Rational64) -> Result<Rational64, CatalogError> {
    let nu = r.rational("nu", default)?;
    if nu.is_negative() {
        return Err(r.constraint(format!("nu = {nu} must satisfy nu >= 0")));
    }
    Ok(nu)
}

fn sigma_t1(r: &Reader) -> Result<SystemSpec, CatalogError> {
    let eps = r.eps()?;
    let nu = nonnegative_nu(r, int(1))?;
    let [x, y] = sigma_t1_pair(eps, nu);
    let mut e = expected(
        CatalogFamily::SigmaT1,
        Expect {
            epsilon: eps,
            kappa: "0".into(),
            nu: "nu".into(),
            family: kappa_zero_constant_nu(nu.is_zero()),
            trivialisable: true,
        },
    );
    e.symmetry = Some(translations());
    Ok(SystemSpec {
        vars: xyw(),
        f: vec![x.into(), y.into(), "0".into()],
        g: vec![strings(["0", "0", "1"])],
        base: vec![0.0; 3],
        plan: None,
        params: [("eps".to_string(), eps.to_string()), ("nu".into(), q(nu))].into(),
        expected: Some(e),
    })
}

fn sigma_t2(r: &Reader) -> Result<SystemSpec, CatalogError> {
    let eps = r.eps()?;
    let nu_src = r.raw("nu").unwrap_or("w");
    let nu = crate::expr::parse_expr(nu_src, &["w"])
        .map_err(|_| r.bad("nu", nu_src, "an expression in w"))?;
    let nu_text = nu.to_string();
    let plan = SamplePlan::default();
    let dnu = differentiate(&nu, 0);
    let nu_constant = is_identically_zero(&[dnu], &[0.0], &plan).is_zero();
    let nu_zero = is_identically_zero(std::slice::from_ref(&nu), &[0.0], &plan).is_zero();
    let family = if nu_constant {
        kappa_zero_constant_nu(nu_zero)
    } else {
        Family::Flat
    };
    Ok(SystemSpec {
        vars: xyw(),
        f: strings(["1", "0", "0"]),
        g: vec![vec![
            "eps*y".into(),
            format!("x - ({nu_text})*y"),
            "1".into(),
        ]],
        base: vec![0.0; 3],
        plan: None,
        params: [("eps".to_string(), eps.to_string())].into(),
        expected: Some(expected(
            CatalogFamily::SigmaT2,
            Expect {
                epsilon: eps,
                kappa: "0".into(),
                nu: nu_text,
                family,
                trivialisable: true,
            },
        )),
    })
}

fn flat(r: &Reader) -> Result<SystemSpec, CatalogError> {
    let eps = r.eps()?;
    let nu1 = r.rational("nu1", int(1))?;
    let nu0 = r.rational("nu0", int(0))?;
    // Solutions of ∂a/∂y = ε + ν1 a, ∂b/∂y = ν1 b − ν0, ∂c/∂y = ν1 c vanishing
    // (a, b) or equal to one (c) at y = 0.
    let (a, b, c) = if nu1.is_zero() {
        ("eps*y", "x - nu0*y", "1")
    } else {
        (
            "eps*(exp(nu1*y) - 1)/nu1",
            "x - nu0*(exp(nu1*y) - 1)/nu1",
            "exp(nu1*y)",
        )
    };
    let family = if nu1.is_zero() {
        kappa_zero_constant_nu(nu0.is_zero())
    } else {
        Family::Flat
    };
    Ok(SystemSpec {
        vars: xyw(),
        f: strings(["1", "0", "0"]),
        g: vec![strings([a, b, c])],
        base: vec![0.0; 3],
        plan: None,
        params: [
            ("eps".to_string(), eps.to_string()),
            ("nu1".into(), q(nu1)),
            ("nu0".into(), q(nu0)),
        ]
        .into(),
        expected: Some(expected(
            CatalogFamily::Flat,
            Expect {
                epsilon: eps,
                kappa: "0".into(),
                nu: "nu1*x + nu0".into(),
                family,
                trivialisable: nu1.is_zero(),
            },
        )),
    })
}

/// `κ = −r² (∂²/∂x² − ε ∂²/∂y²) ln r`.
pub fn conformal_curvature(r: &Expr, eps: i64) -> Expr {
    let ln = r.ln();
    let lap = differentiate(&differentiate(&ln, 0), 0)
        - Expr::int(eps) * differentiate(&differentiate(&ln, 1), 1);
    -(r.powi(2) * lap)
}

/// The ν = 0 system driven by a positive factor `r(x, y)`.
fn conformal_system(r: &Expr, eps: i64) -> [String; 3] {
    let (c, s) = trig(eps);
    let r_text = r.to_string();
    let rx = differentiate(r, 0).to_string();
    let ry = differentiate(r, 1).to_string();
    [
        format!("({r_text})*{c}"),
        format!("({r_text})*{s}"),
        format!("eps*({ry})*{c} + ({rx})*{s}"),
    ]
}

fn positive_on_box(r: &Reader, e: &Expr, name: &str) -> Result<(), CatalogError> {
    let sampled = SamplePlan::default().evaluate(std::slice::from_ref(e), &[0.0; 3]);
    let positive = !sampled.is_inconclusive()
        && sampled.samples.first().is_some_and(|s| s.point == [0.0; 3])
        && sampled.samples.iter().all(|s| s.values[0] > 1e-6);
    if !positive {
        return Err(r.constraint(format!("{name} > 0 on the sampling box")));
    }
    Ok(())
}

fn centro_flat(r: &Reader) -> Result<SystemSpec, CatalogError> {
    let eps = r.eps()?;
    let src = r.raw("r").unwrap_or("1 + (x^2 + 2*y^2)/8");
    let factor = crate::expr::parse_expr(src, &["x", "y"])
        .map_err(|_| r.bad("r", src, "an expression in x and y"))?;
    positive_on_box(r, &factor, "r")?;
    let kappa = conformal_curvature(&factor, eps);
    let plan = SamplePlan::default();
    let base = [0.0; 3];
    let kappa_zero = is_identically_zero(std::slice::from_ref(&kappa), &base, &plan).is_zero();
    let partials: Vec<Expr> = (0..2).map(|j| differentiate(&kappa, j)).collect();
    let kappa_constant = is_identically_zero(&partials, &base, &plan).is_zero();
    let family = match (kappa_zero, kappa_constant) {
        (true, _) => Family::CompletelyFlat,
        (false, true) => Family::FlatConstant,
        (false, false) => Family::CentroFlat,
    };
    Ok(SystemSpec {
        vars: xyw(),
        f: conformal_system(&factor, eps).to_vec(),
        g: vec![strings(["0", "0", "1"])],
        base: base.to_vec(),
        plan: None,
        params: [("eps".to_string(), eps.to_string())].into(),
        expected: Some(expected(
            CatalogFamily::CentroFlat,
            Expect {
                epsilon: eps,
                kappa: kappa.to_string(),
                nu: "0".into(),
                family,
                trivialisable: kappa_zero,
            },
        )),
    })
}

fn centro_flat_constant(r: &Reader) -> Result<SystemSpec, CatalogError> {
    let eps = r.eps()?;
    let nu = nonnegative_nu(r, int(1))?;
    let two = int(2);
    let (x, y, gw) = if eps > 0 {
        (
            "exp(nu*w)*exp(w*sqrt(nu^2 + 4))",
            "exp(nu*w)*exp(-w*sqrt(nu^2 + 4))",
            "1/2",
        )
    } else if nu > two {
        (
            "exp(nu*w)*exp(w*sqrt(nu^2 - 4))",
            "exp(nu*w)*exp(-w*sqrt(nu^2 - 4))",
            "1/2",
        )
    } else if nu == two {
        ("exp(w)", "w*exp(w)", "1")
    } else {
        (
            "exp(nu*w)*cos(w*sqrt(4 - nu^2))",
            "exp(nu*w)*sin(w*sqrt(4 - nu^2))",
            "1/2",
        )
    };
    let mut e = expected(
        CatalogFamily::CentroFlatConstant,
        Expect {
            epsilon: eps,
            kappa: "0".into(),
            nu: "nu".into(),
            family: kappa_zero_constant_nu(nu.is_zero()),
            trivialisable: true,
        },
    );
    e.symmetry = Some(translations());
    Ok(SystemSpec {
        vars: xyw(),
        f: strings([x, y, "0"]),
        g: vec![strings(["0", "0", gw])],
        base: vec![0.0; 3],
        plan: None,
        params: [("eps".to_string(), eps.to_string()), ("nu".into(), q(nu))].into(),
        expected: Some(e),
    })
}

fn flat_constant(r: &Reader) -> Result<SystemSpec, CatalogError> {
    let eps = r.eps()?;
    let kappa = r.rational("kappa", int(1))?;
    let (c, s) = trig(eps);
    let factor = "(1 - kappa/4*(x^2 - eps*y^2))";
    let params: BTreeMap<String, String> = [
        ("eps".to_string(), eps.to_string()),
        ("kappa".into(), q(kappa)),
    ]
    .into();
    let chart = Chart::new(xyw());
    let values = [
        ("eps".to_string(), Scalar::int(eps)),
        ("kappa".to_string(), Scalar::Rational(kappa)),
    ]
    .into();
    let rexpr = chart.parse(factor, &values).expect("well-formed factor");
    positive_on_box(r, &rexpr, "1 - kappa/4*(x^2 - eps*y^2)")?;
    let family = if kappa.is_zero() {
        Family::CompletelyFlat
    } else {
        Family::FlatConstant
    };
    Ok(SystemSpec {
        vars: xyw(),
        f: vec![
            format!("{factor}*{c}"),
            format!("{factor}*{s}"),
            // ε ∂r/∂y c_ε + ∂r/∂x s_ε, which makes the pair canonical.
            format!("kappa/2*(y*{c} - x*{s})"),
        ],
        g: vec![strings(["0", "0", "1"])],
        base: vec![0.0; 3],
        plan: None,
        params,
        expected: Some(expected(
            CatalogFamily::FlatConstant,
            Expect {
                epsilon: eps,
                kappa: "kappa".into(),
                nu: "0".into(),
                family,
                trivialisable: kappa.is_zero(),
            },
        )),
    })
}

fn completely_flat(r: &Reader) -> Result<SystemSpec, CatalogError> {
    let eps = r.eps()?;
    let (c, s) = trig(eps);
    let mut e = expected(
        CatalogFamily::CompletelyFlat,
        Expect {
            epsilon: eps,
            kappa: "0".into(),
            nu: "0".into(),
            family: Family::CompletelyFlat,
            trivialisable: true,
        },
    );
    e.symmetry = Some(translations());
    Ok(SystemSpec {
        vars: xyw(),
        f: strings([c, s, "0"]),
        g: vec![strings(["0", "0", "1"])],
        base: vec![0.0; 3],
        plan: None,
        params: BTreeMap::new(),
        expected: Some(e),
    })
}

/// Eigenvalues and the 0/1 weights `η` (η_1 = 1).
fn lambda_eta(r: &Reader) -> Result<(Vec<Rational64>, Vec<bool>), CatalogError> {
    let lambda = r
        .list("lambda")?
        .unwrap_or_else(|| vec![int(1), Rational64::new(3, 2)]);
    if lambda.is_empty() {
        return Err(r.constraint("at least one eigenvalue"));
    }
    if lambda.iter().any(Zero::is_zero) {
        return Err(r.constraint("eigenvalues must be non-zero (ad v0 non-singular)"));
    }
    let eta = match r.list("eta")? {
        None => vec![true; lambda.len()],
        Some(e) => {
            if e.len() != lambda.len() || e.iter().any(|v| *v != int(0) && *v != int(1)) {
                return Err(r.constraint("eta must list one 0/1 value per eigenvalue"));
            }
            e.iter().map(|v| !v.is_zero()).collect()
        }
    };
    if !eta[0] {
        return Err(r.constraint("eta_1 = 1"));
    }
    Ok((lambda, eta))
}

fn lambda_chart(n: usize) -> Vec<String> {
    let mut vars: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    vars.push("w".into());
    vars
}

fn coordinate_generators(n: usize) -> Vec<GeneratorSpec> {
    (0..n)
        .map(|i| GeneratorSpec {
            label: format!("v{}", i + 1),
            components: (0..=n)
                .map(|j| if i == j { "1" } else { "0" }.to_string())
                .collect(),
        })
        .collect()
}

/// `[v_i, v0] = λ_i v_i` with `v0 = Σ λ_i x_i ∂x_i + w_part ∂w`.
fn almost_abelian(lambda: &[Rational64], w_part: String, k: Option<i64>) -> PresentationSpec {
    let n = lambda.len();
    let mut generators = coordinate_generators(n);
    let mut v0: Vec<String> = (1..=n).map(|i| format!("lambda{i}*x{i}")).collect();
    v0.push(w_part);
    generators.push(GeneratorSpec {
        label: "v0".into(),
        components: v0,
    });
    let table = (0..n)
        .map(|i| BracketSpec {
            left: format!("v{}", i + 1),
            right: "v0".into(),
            result: [(format!("v{}", i + 1), q(lambda[i]))].into(),
        })
        .collect();
    PresentationSpec {
        generators,
        table,
        almost_abelian: Some(AlmostAbelianSpec {
            ideal: (1..=n).map(|i| format!("v{i}")).collect(),
            v0: "v0".into(),
            eigenvalues: lambda.iter().map(|l| q(*l)).collect(),
            k,
        }),
    }
}

fn lambda_params(lambda: &[Rational64]) -> BTreeMap<String, String> {
    lambda
        .iter()
        .enumerate()
        .map(|(i, l)| (format!("lambda{}", i + 1), q(*l)))
        .collect()
}

fn sigma_lambda(r: &Reader) -> Result<SystemSpec, CatalogError> {
    let (lambda, eta) = lambda_eta(r)?;
    let n = lambda.len();
    let mut f: Vec<String> = (1..=n)
        .map(|i| {
            if eta[i - 1] {
                format!("(w + 1)^(lambda{i})")
            } else {
                "0".into()
            }
        })
        .collect();
    f.push("0".into());
    let mut g = vec!["0".to_string(); n];
    g.push("1".into());
    // For n = 3 the structure functions are λ1 = −ab/(w+1)², λ3 = (a+b−1)/(w+1),
    // giving ε = −sign(ab), κ = 0, ν = (a+b)/√|ab|.
    let mut e = match (n, eta.as_slice()) {
        (2, [true, true]) if lambda[0] != lambda[1] => {
            let (a, b) = (lambda[0], lambda[1]);
            expected(
                CatalogFamily::SigmaLambda,
                Expect {
                    epsilon: if (a * b).is_positive() { -1 } else { 1 },
                    kappa: "0".into(),
                    nu: "abs(lambda1 + lambda2)/sqrt(abs(lambda1*lambda2))".into(),
                    family: kappa_zero_constant_nu((a + b).is_zero()),
                    trivialisable: true,
                },
            )
        }
        // Structure functions only exist in dimension three.
        _ => Expected::degenerate(CatalogFamily::SigmaLambda.id()),
    };
    e.symmetry = Some(almost_abelian(&lambda, "w + 1".into(), None));
    Ok(SystemSpec {
        vars: lambda_chart(n),
        f,
        g: vec![g],
        base: vec![0.0; n + 1],
        plan: None,
        params: lambda_params(&lambda),
        expected: Some(e),
    })
}

fn sigma_lambda_0k(r: &Reader) -> Result<SystemSpec, CatalogError> {
    let k = r.rational("k", int(2))?;
    if !k.is_integer() || k < int(1) {
        return Err(r.constraint(format!("k = {k} must be a positive integer")));
    }
    let k = k.to_integer();
    let (lambda, eta) = lambda_eta(r)?;
    integrality_constraint(&lambda, k).map_err(|e| r.constraint(e))?;
    let n = lambda.len();
    let mut f: Vec<String> = lambda
        .iter()
        .zip(&eta)
        .map(|(l, on)| {
            let p = (int(k) * l / lambda[0]).to_integer();
            if *on {
                format!("w^{p}")
            } else {
                "0".into()
            }
        })
        .collect();
    f.push("0".into());
    let mut g = vec!["0".to_string(); n];
    g.push("1".into());
    let mut params = lambda_params(&lambda);
    params.insert("k".into(), k.to_string());
    // f(ξ0) = 0 ∈ G at w = 0, so the three-dimensional invariants are undefined there.
    let mut e = Expected::degenerate(CatalogFamily::SigmaLambda0k.id());
    e.symmetry = Some(almost_abelian(&lambda, "lambda1/k*w".into(), Some(k)));
    Ok(SystemSpec {
        vars: lambda_chart(n),
        f,
        g: vec![g],
        base: vec![0.0; n + 1],
        plan: None,
        params,
        expected: Some(e),
    })
}

/// The documented parameter sweep for the round-trip suite.
pub fn sweep() -> Vec<(CatalogFamily, Vec<(&'static str, &'static str)>)> {
    use CatalogFamily::*;
    let mut out = Vec::new();
    for eps in ["-1", "1"] {
        out.push((CompletelyFlat, vec![("eps", eps)]));
        for nu in ["0", "1", "2", "3"] {
            out.push((CentroFlatConstant, vec![("eps", eps), ("nu", nu)]));
            out.push((SigmaT1, vec![("eps", eps), ("nu", nu)]));
        }
        for nu in ["w", "0", "2", "w^2 + 1", "sin(w)"] {
            out.push((SigmaT2, vec![("eps", eps), ("nu", nu)]));
        }
        for kappa in ["0", "1", "-1"] {
            out.push((FlatConstant, vec![("eps", eps), ("kappa", kappa)]));
        }
        for (nu1, nu0) in [
            ("0", "0"),
            ("0", "1"),
            ("1", "0"),
            ("2", "3"),
            ("-1", "1/2"),
        ] {
            out.push((Flat, vec![("eps", eps), ("nu1", nu1), ("nu0", nu0)]));
        }
        for r in ["1 + (x^2 + 2*y^2)/8", "exp(x/3)", "1 + x/4"] {
            out.push((CentroFlat, vec![("eps", eps), ("r", r)]));
        }
    }
    for (a, b) in [("1", "2"), ("1", "-1"), ("-1", "3"), ("1/2", "3")] {
        out.push((Trivial, vec![("a", a), ("b", b)]));
    }
    for lambda in ["1,-1", "2,1", "1,3/2", "1,2,3"] {
        out.push((SigmaLambda, vec![("lambda", lambda)]));
    }
    for (k, lambda) in [("2", "1,3/2"), ("1", "1,2"), ("3", "1,4/3,2")] {
        out.push((SigmaLambda0k, vec![("k", k), ("lambda", lambda)]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(f: CatalogFamily, p: &[(&str, &str)]) -> CatalogEntry {
        generate_with(f, p).unwrap()
    }

    #[test]
    fn completely_flat_elliptic() {
        let e = gen(CatalogFamily::CompletelyFlat, &[("eps", "-1")]);
        let sys = e.spec.build().unwrap();
        assert_eq!(sys.f.component(0).to_string(), "cos(w)");
        assert_eq!(sys.f.component(1).to_string(), "sin(w)");
        assert_eq!(e.expected().epsilon, Some(-1));
        assert_eq!(e.expected().trivialisable, Some(Verdict::Yes));
    }

    #[test]
    fn centro_flat_constant_subcases() {
        let e = gen(
            CatalogFamily::CentroFlatConstant,
            &[("eps", "-1"), ("nu", "1")],
        );
        let sys = e.spec.build().unwrap();
        let at = [0.0, 0.0, 0.3];
        let x = sys.f.component(0).eval(&at).unwrap();
        assert!((x - (0.3f64).exp() * (0.3 * 3f64.sqrt()).cos()).abs() < 1e-14);
        assert_eq!(sys.g[0].component(2).to_string(), "1/2");
        let c = gen(
            CatalogFamily::CentroFlatConstant,
            &[("eps", "-1"), ("nu", "2")],
        );
        assert_eq!(c.spec.f[1], "w*exp(w)");
        assert_eq!(c.spec.g[0][2], "1");
        let b = gen(
            CatalogFamily::CentroFlatConstant,
            &[("eps", "-1"), ("nu", "3")],
        );
        assert!(b.spec.f[0].contains("nu^2 - 4"));
        assert!(matches!(
            generate_with(CatalogFamily::CentroFlatConstant, &[("nu", "-1")]),
            Err(CatalogError::Constraint { .. })
        ));
    }

    #[test]
    fn sigma_lambda_0k_polynomial_and_refusal() {
        let e = gen(
            CatalogFamily::SigmaLambda0k,
            &[("k", "2"), ("lambda", "1,3/2")],
        );
        assert_eq!(e.spec.f, ["w^2", "w^3", "0"]);
        assert!(e.expected().symmetry.is_some());
        let err = generate_with(
            CatalogFamily::SigmaLambda0k,
            &[("k", "2"), ("lambda", "2,1")],
        )
        .unwrap_err();
        assert!(err.to_string().contains("< k"), "{err}");
    }

    #[test]
    fn parameter_errors_name_the_problem() {
        assert!(matches!(
            generate_with(CatalogFamily::CompletelyFlat, &[("eps", "2")]),
            Err(CatalogError::Constraint { .. })
        ));
        assert!(matches!(
            generate_with(CatalogFamily::CompletelyFlat, &[("nu", "2")]),
            Err(CatalogError::UnknownParam { .. })
        ));
        assert!(matches!(
            generate_with(CatalogFamily::Trivial, &[("a", "x")]),
            Err(CatalogError::BadValue { .. })
        ));
        assert!(matches!(
            generate_with(CatalogFamily::FlatConstant, &[("kappa", "100")]),
            Err(CatalogError::Constraint { .. })
        ));
    }

    #[test]
    fn flat_closed_forms_solve_their_equations() {
        for (nu1, nu0) in [("0", "1"), ("2", "3"), ("-1", "1/2")] {
            for eps in ["-1", "1"] {
                let e = gen(
                    CatalogFamily::Flat,
                    &[("eps", eps), ("nu1", nu1), ("nu0", nu0)],
                );
                let sys = e.spec.build().unwrap();
                let values = e.spec.param_values().unwrap();
                let p = |s: &str| sys.chart.parse(s, &values).unwrap();
                let (a, c) = (sys.g[0].component(0), sys.g[0].component(2));
                let b = sys.g[0].component(1) - sys.chart.var(0);
                let residuals = [
                    differentiate(a, 1) - p("eps") - p("nu1") * a,
                    differentiate(&b, 1) - p("nu1") * &b + p("nu0"),
                    differentiate(c, 1) - p("nu1") * c,
                ];
                let plan = SamplePlan::default();
                assert!(is_identically_zero(&residuals, &[0.0; 3], &plan).is_zero());
                // Boundary values at y = 0.
                for (v, want) in [(a.clone(), 0.0), (b, 0.0), (c.clone(), 1.0)] {
                    assert!((v.eval(&[0.4, 0.0, -0.2]).unwrap() - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn conformal_factor_satisfies_its_curvature_equation() {
        for eps in [-1, 1] {
            for kappa in [1, -1, 2] {
                let chart = Chart::new(["x", "y", "w"]);
                let r = chart
                    .parse(
                        &format!("1 - {kappa}/4*(x^2 - ({eps})*y^2)"),
                        &BTreeMap::new(),
                    )
                    .unwrap();
                let residual = conformal_curvature(&r, eps) - Expr::int(kappa);
                assert!(
                    is_identically_zero(&[residual], &[0.0; 3], &SamplePlan::default()).is_zero()
                );
            }
        }
    }

    #[test]
    fn sigma_t1_wronskian_ratio() {
        for eps in [-1i64, 1] {
            for nu in ["0", "1", "2", "3"] {
                let e = gen(
                    CatalogFamily::SigmaT1,
                    &[("eps", &eps.to_string()), ("nu", nu)],
                );
                let sys = e.spec.build().unwrap();
                let (f1, f2) = (sys.f.component(0), sys.f.component(1));
                let d = |e: &Expr| differentiate(e, 2);
                let w = |a: &Expr, b: &Expr| d(a) * b - a * d(b);
                let ratio = w(&d(f1), &d(f2)) / w(f1, f2);
                let residual = ratio + Expr::int(eps);
                assert!(
                    is_identically_zero(&[residual], &[0.0; 3], &SamplePlan::default()).is_zero(),
                    "eps {eps} nu {nu}"
                );
            }
        }
    }

    #[test]
    fn canonical_families_are_canonical_pairs() {
        let plan = SamplePlan::default();
        for (f, p) in sweep().into_iter().filter(|(f, _)| f.is_canonical()) {
            let e = gen(f, &p);
            let sys = e.spec.build().unwrap();
            let sf = crate::structure::compute_structure_functions(&sys, &plan).unwrap();
            let eps = Expr::int(e.expected().epsilon.unwrap() as i64);
            let residuals = [sf.k[2].clone(), sf.k[1].clone(), &sf.lambda[0] - &eps];
            assert!(
                is_identically_zero(&residuals, &sys.base, &plan).is_zero(),
                "{f} {p:?}"
            );
        }
    }

    #[test]
    fn sweep_generates() {
        for (f, p) in sweep() {
            let e = generate_with(f, &p).unwrap_or_else(|e| panic!("{f} {p:?}: {e}"));
            e.spec.build().unwrap();
        }
    }
}
