//! The `trivcheck` commands as library functions returning their output and
//! exit code, so the binary stays a thin argument parser.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use trivcheck_core::analysis::{
    analyze_spec, check_expected, AnalysisReport, Status, SymmetrySection,
};
use trivcheck_core::catalog::{generate, CatalogFamily};
use trivcheck_core::check::{Check, Outcome, Verdict};
use trivcheck_core::expr::{Expr, SamplePlan};
use trivcheck_core::feedback::{apply_feedback, pushforward, Diffeomorphism, FeedbackTransform};
use trivcheck_core::geometry::VectorField;
use trivcheck_core::structure::ControlSystem;
use trivcheck_core::suites::{run_suite, SuiteReport, SUITES};
use trivcheck_core::symmetry::{
    check_abelian_trivialisation, check_rank_condition_sigma_t, is_infinitesimal_symmetry,
    AbelianReport, RankConditionReport, SymmetryCandidate, SymmetryReport,
};
use trivcheck_core::sysfile::SystemSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_ASSUMPTIONS: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
/// `verify` found failing checks.
pub const EXIT_VERIFY_FAILED: i32 = 4;

/// What a command prints and how the process should exit.
#[derive(Debug)]
pub struct Output {
    pub text: String,
    pub code: i32,
}

impl Output {
    fn new(text: String, code: i32) -> Output {
        Output { text, code }
    }
}

/// Command-line overrides of the sampling plan.
#[derive(Clone, Debug, Default)]
pub struct PlanFlags {
    pub samples: Option<usize>,
    pub half_width: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

impl PlanFlags {
    pub fn apply(&self, mut plan: SamplePlan) -> SamplePlan {
        if let Some(n) = self.samples {
            plan.samples = n;
        }
        if let Some(h) = self.half_width {
            plan.half_width = h;
        }
        if let Some(t) = self.tol {
            plan.abs_tol = t;
            plan.rel_tol = t;
        }
        if let Some(s) = self.seed {
            plan.seed = s;
        }
        plan
    }

    fn check(&self) -> Result<()> {
        if self.samples == Some(0) {
            bail!("--samples must be positive");
        }
        if let Some(h) = self.half_width {
            if !(h.is_finite() && h >= 0.0) {
                bail!("--box must be a finite non-negative half-width");
            }
        }
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                bail!("--tol must be positive");
            }
        }
        Ok(())
    }
}

pub fn load(path: &Path) -> Result<SystemSpec> {
    let src =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let spec = SystemSpec::from_json(&src)
        .with_context(|| format!("{}: invalid system file", path.display()))?;
    if let Some(p) = &spec.plan {
        if p.samples == 0 || !(p.half_width.is_finite() && p.half_width >= 0.0) {
            bail!(
                "{}: plan needs samples > 0 and a finite half_width >= 0",
                path.display()
            );
        }
    }
    Ok(spec)
}

fn build(spec: &SystemSpec, path: &Path) -> Result<ControlSystem> {
    spec.build()
        .with_context(|| format!("{}: invalid system", path.display()))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports always serialize") + "\n"
}

/// Splits a comma-separated expression list, ignoring commas inside parentheses.
pub fn split_list(src: &str) -> Vec<String> {
    let mut out = Vec::new();
    let (mut depth, mut cur) = (0i32, String::new());
    for ch in src.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    out.push(cur.trim().to_string());
    out
}

fn parse_in(spec: &SystemSpec, what: &str, src: &str) -> Result<Expr> {
    let params = spec.param_values()?;
    spec.chart()
        .parse(src, &params)
        .with_context(|| format!("{what}: cannot parse `{src}`"))
}

fn parse_list(spec: &SystemSpec, what: &str, src: &str) -> Result<Vec<Expr>> {
    let items = split_list(src);
    if items.len() != spec.vars.len() {
        bail!(
            "{what}: expected {} components, got {}",
            spec.vars.len(),
            items.len()
        );
    }
    items.iter().map(|s| parse_in(spec, what, s)).collect()
}

fn outcome_word(o: Outcome) -> &'static str {
    match o {
        Outcome::Pass => "PASS",
        Outcome::Fail => "FAIL",
        Outcome::Inconclusive => "INCONCLUSIVE",
    }
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Yes => "YES",
        Verdict::No => "NO",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

fn check_line(c: &Check) -> String {
    let mut line = format!("{:<5} {}", outcome_word(c.outcome), c.name);
    if let Some(v) = c.value {
        let _ = write!(line, " ({v:.3e})");
    }
    if let Some(n) = &c.note {
        let _ = write!(line, ": {n}");
    }
    if c.outcome != Outcome::Pass {
        if let Some(w) = &c.witness {
            let _ = write!(
                line,
                " [witness: value {:.6e} at {:?}, component {}]",
                w.value, w.point, w.component
            );
        }
    }
    line
}

fn at_base(v: Option<f64>) -> String {
    match v {
        // `+ 0.0` turns −0 into 0.
        Some(v) => format!("{}", v + 0.0),
        None => "undefined".into(),
    }
}

fn render_report(r: &AnalysisReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "vars: {}   base: {:?}", r.vars.join(", "), r.base);
    let _ = writeln!(
        s,
        "status: {}",
        serde_json::to_value(r.status).unwrap().as_str().unwrap()
    );
    if let Some(e) = &r.error {
        let _ = writeln!(s, "error: {e}");
    }
    if let Some(a) = &r.assumptions {
        let _ = writeln!(s, "{}", check_line(&a.a1));
        let _ = writeln!(s, "{}", check_line(&a.a2));
    }
    if let Some(sf) = &r.structure_functions {
        let _ = writeln!(s, "structure functions:");
        for e in sf {
            let _ = writeln!(
                s,
                "  {:<8} = {}   (at base: {})",
                e.name,
                e.expr,
                at_base(e.value_at_base)
            );
        }
    }
    if let Some(i) = &r.invariants {
        let _ = writeln!(s, "epsilon = {}", i.epsilon);
        let _ = writeln!(
            s,
            "kappa   = {}   (at base: {})",
            i.kappa.expr,
            at_base(i.kappa.value_at_base)
        );
        let _ = writeln!(
            s,
            "nu      = {}   (at base: {})",
            i.nu.expr,
            at_base(i.nu.value_at_base)
        );
    }
    if let Some(t) = &r.trivialisable {
        let _ = writeln!(s, "trivialisable: {}", verdict_word(t.verdict));
        for c in &t.checks {
            let _ = writeln!(s, "  {}", check_line(c));
        }
    }
    if let Some(f) = r.family {
        let _ = writeln!(s, "family: {}", f.id());
    }
    if let Some(sym) = &r.symmetry {
        let _ = writeln!(s, "symmetry algebra: {}", verdict_word(sym.verdict));
        for c in sym.checks() {
            let _ = writeln!(s, "  {}", check_line(&c));
        }
    }
    let findings = r.findings();
    if findings.is_empty() {
        let _ = writeln!(s, "findings: none");
    } else {
        let _ = writeln!(s, "findings:");
        for c in findings {
            let _ = writeln!(s, "  {}", check_line(c));
        }
    }
    s
}

fn status_code(r: &AnalysisReport) -> i32 {
    match r.status {
        Status::Analyzed | Status::UnsupportedShape => EXIT_OK,
        Status::AssumptionsFailed => EXIT_ASSUMPTIONS,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Runs the full pipeline on a system file.
pub fn cmd_analyze(path: &Path, flags: &PlanFlags, json: bool) -> Result<Output> {
    flags.check()?;
    let spec = load(path)?;
    let plan = flags.apply(spec.plan());
    let analysis = analyze_spec(&spec, &plan)
        .with_context(|| format!("{}: invalid system", path.display()))?;
    let r = &analysis.report;
    let text = if json { r.to_json() } else { render_report(r) };
    Ok(Output::new(text, status_code(r)))
}

/// A catalog normal form as a system file with its expected block.
pub fn cmd_catalog(family: &str, params: &BTreeMap<String, String>) -> Result<Output> {
    let family = CatalogFamily::from_id(family).with_context(|| {
        let ids: Vec<&str> = CatalogFamily::ALL.iter().map(|f| f.id()).collect();
        format!("unknown family `{family}` (known: {})", ids.join(", "))
    })?;
    let entry = generate(family, params)?;
    Ok(Output::new(entry.spec.to_json(), EXIT_OK))
}

pub enum Transform {
    Feedback { alpha: String, beta: String },
    Diffeo { forward: String, inverse: String },
}

/// Writes components back, keeping the original text where nothing changed.
fn respec(spec: &SystemSpec, before: &ControlSystem, after: &ControlSystem) -> SystemSpec {
    let strings = |old: &VectorField, new: &VectorField, text: &[String]| -> Vec<String> {
        new.components()
            .iter()
            .zip(old.components())
            .zip(text)
            .map(|((n, o), t)| if n == o { t.clone() } else { n.to_string() })
            .collect()
    };
    SystemSpec {
        vars: spec.vars.clone(),
        f: strings(&before.f, &after.f, &spec.f),
        g: before
            .g
            .iter()
            .zip(&after.g)
            .zip(&spec.g)
            .map(|((o, n), t)| strings(o, n, t))
            .collect(),
        base: after.base.clone(),
        plan: spec.plan.clone(),
        params: spec.params.clone(),
        expected: None,
    }
}

/// Applies feedback or a change of coordinates and emits the new system file
/// (without an expected block).
pub fn cmd_transform(path: &Path, t: &Transform, flags: &PlanFlags) -> Result<Output> {
    flags.check()?;
    let spec = load(path)?;
    let sys = build(&spec, path)?;
    let plan = flags.apply(spec.plan());
    let moved = match t {
        Transform::Feedback { alpha, beta } => {
            let ft = FeedbackTransform::new(
                parse_in(&spec, "--alpha", alpha)?,
                parse_in(&spec, "--beta", beta)?,
            );
            apply_feedback(&sys, &ft, &plan)?
        }
        Transform::Diffeo { forward, inverse } => {
            let d = Diffeomorphism::new(
                parse_list(&spec, "--diffeo forward", forward)?,
                parse_list(&spec, "--diffeo inverse", inverse)?,
            );
            pushforward(&sys, &d, &plan)?
        }
    };
    Ok(Output::new(respec(&spec, &sys, &moved).to_json(), EXIT_OK))
}

#[derive(Debug, Default, Serialize)]
pub struct SymmetryOutput {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<SymmetryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abelian: Option<AbelianReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_condition: Option<RankConditionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub presentation: Option<SymmetrySection>,
}

impl SymmetryOutput {
    fn verdicts(&self) -> Vec<Verdict> {
        let mut v: Vec<Verdict> = self.candidates.iter().map(|c| c.verdict).collect();
        v.extend(self.abelian.as_ref().map(|a| a.verdict));
        v.extend(self.rank_condition.as_ref().map(|r| r.verdict));
        v.extend(self.presentation.as_ref().map(|p| p.verdict));
        v
    }

    fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.candidates {
            let _ = writeln!(s, "candidate {}: {}", c.label, verdict_word(c.verdict));
            for k in &c.checks {
                let _ = writeln!(s, "  {}", check_line(k));
            }
        }
        if let Some(a) = &self.abelian {
            let _ = writeln!(s, "abelian trivialisation: {}", verdict_word(a.verdict));
            for k in a
                .involutive
                .iter()
                .chain(&a.commuting)
                .chain([&a.transversality])
            {
                let _ = writeln!(s, "  {}", check_line(k));
            }
        }
        if let Some(r) = &self.rank_condition {
            let _ = writeln!(
                s,
                "rank condition: {} (k = {}, rank dh = {}, rank dh/dw = {}, equivalent form agrees: {})",
                verdict_word(r.verdict),
                r.k,
                r.rank_dh,
                r.rank_dh_dw,
                r.equivalent_form_agrees
            );
        }
        if let Some(p) = &self.presentation {
            let _ = writeln!(s, "symmetry algebra: {}", verdict_word(p.verdict));
            for c in p.checks() {
                let _ = writeln!(s, "  {}", check_line(&c));
            }
        }
        s
    }
}

pub struct SymmetryRequest {
    /// Comma-separated components, one candidate each.
    pub candidates: Vec<String>,
    /// Treat the candidates as a commuting transversal set.
    pub abelian: bool,
    /// Rank test for `ẋ = h(x, w)`, `ẇ = u` with the `w`'s last.
    pub rank_condition: bool,
}

/// Symmetry checks; with no request, checks the file's claimed presentation.
pub fn cmd_symmetry(
    path: &Path,
    req: &SymmetryRequest,
    flags: &PlanFlags,
    json: bool,
) -> Result<Output> {
    flags.check()?;
    let spec = load(path)?;
    let sys = build(&spec, path)?;
    let plan = flags.apply(spec.plan());
    let mut out = SymmetryOutput::default();
    let cands = req
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let v = VectorField::new(parse_list(&spec, "--candidate", c)?);
            Ok(SymmetryCandidate::new(format!("v{}", i + 1), v))
        })
        .collect::<Result<Vec<_>>>()?;
    if req.abelian {
        out.abelian = Some(check_abelian_trivialisation(&sys, &cands, &plan)?);
    } else {
        for c in &cands {
            out.candidates
                .push(is_infinitesimal_symmetry(&sys, c, &plan)?);
        }
    }
    if req.rank_condition {
        let (n, m) = (sys.dim(), sys.inputs());
        for (j, g) in sys.g.iter().enumerate() {
            if *g != sys.chart.coordinate_field(n - m + j) {
                bail!("rank condition needs g[{j}] = d/d{}", spec.vars[n - m + j]);
            }
        }
        let h = &sys.f.components()[..n.saturating_sub(m)];
        if sys.f.components()[n - m..].iter().any(|e| !e.is_zero()) {
            bail!("rank condition needs the last {m} drift components to vanish");
        }
        out.rank_condition = Some(check_rank_condition_sigma_t(
            h, &sys.chart, m, &sys.base, &plan,
        )?);
    }
    if cands.is_empty() && !req.rank_condition {
        let p = spec
            .presentation()?
            .context("no candidates given and the file claims no symmetry algebra")?;
        out.presentation = Some(SymmetrySection::new(&sys, &p, &plan));
    }
    let verdicts = out.verdicts();
    let code = if verdicts.contains(&Verdict::Inconclusive) {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    let text = if json { to_json(&out) } else { out.render() };
    Ok(Output::new(text, code))
}

pub enum VerifyTarget<'a> {
    File(&'a Path),
    /// A suite name, or `all`.
    Suite(&'a str),
}

#[derive(Debug, Serialize)]
struct FileVerification {
    file: String,
    passed: bool,
    checks: Vec<Check>,
}

fn render_checks(title: &str, checks: &[Check]) -> String {
    let mut s = String::new();
    let passed = checks.iter().filter(|c| c.passed()).count();
    for c in checks {
        let _ = writeln!(s, "{}", check_line(c));
    }
    let _ = writeln!(
        s,
        "{title}: {passed}/{} checks passed — {}",
        checks.len(),
        if passed == checks.len() {
            "PASS"
        } else {
            "FAIL"
        }
    );
    s
}

/// Compares a file with its expected block, or runs built-in suites.
pub fn cmd_verify(
    target: VerifyTarget,
    flags: &PlanFlags,
    max_error: f64,
    json: bool,
) -> Result<Output> {
    flags.check()?;
    match target {
        VerifyTarget::File(path) => {
            let mut spec = load(path)?;
            spec.plan = Some(flags.apply(spec.plan()));
            let expected = spec.expected.clone().with_context(|| {
                format!("{}: no expected block to verify against", path.display())
            })?;
            let checks = check_expected(&spec, &expected, max_error)
                .with_context(|| format!("{}: invalid system", path.display()))?;
            let passed = checks.iter().all(Check::passed);
            let text = if json {
                to_json(&FileVerification {
                    file: path.display().to_string(),
                    passed,
                    checks,
                })
            } else {
                render_checks(&path.display().to_string(), &checks)
            };
            Ok(Output::new(
                text,
                if passed { EXIT_OK } else { EXIT_VERIFY_FAILED },
            ))
        }
        VerifyTarget::Suite(name) => {
            let seed = flags.seed.unwrap_or(SamplePlan::default().seed);
            let names: Vec<&str> = if name == "all" {
                SUITES.to_vec()
            } else {
                vec![name]
            };
            let mut reports: Vec<SuiteReport> = Vec::new();
            for n in names {
                reports.push(run_suite(n, seed).with_context(|| {
                    format!("unknown suite `{n}` (known: {}, all)", SUITES.join(", "))
                })?);
            }
            let passed = reports.iter().all(|r| r.verdict == Verdict::Yes);
            let text = if json {
                to_json(&reports)
            } else {
                let mut s = String::new();
                for r in &reports {
                    let failures: Vec<Check> = r.failures().cloned().collect();
                    for c in &failures {
                        let _ = writeln!(s, "{}", check_line(c));
                    }
                    let _ = writeln!(
                        s,
                        "suite {}: {}/{} checks passed — {}",
                        r.name,
                        r.checks.len() - failures.len(),
                        r.checks.len(),
                        if r.verdict == Verdict::Yes {
                            "PASS"
                        } else {
                            "FAIL"
                        }
                    );
                }
                s
            };
            Ok(Output::new(
                text,
                if passed { EXIT_OK } else { EXIT_VERIFY_FAILED },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_split_at_top_level() {
        assert_eq!(split_list("x, y + sin(w), -w"), ["x", "y + sin(w)", "-w"]);
        assert_eq!(split_list("x"), ["x"]);
    }

    #[test]
    fn plan_flags_override() {
        let flags = PlanFlags {
            samples: Some(8),
            half_width: Some(0.1),
            tol: Some(1e-6),
            seed: Some(3),
        };
        let p = flags.apply(SamplePlan::default());
        assert_eq!(
            (p.samples, p.half_width, p.abs_tol, p.rel_tol, p.seed),
            (8, 0.1, 1e-6, 1e-6, 3)
        );
        assert!(PlanFlags {
            samples: Some(0),
            ..Default::default()
        }
        .check()
        .is_err());
    }
}
