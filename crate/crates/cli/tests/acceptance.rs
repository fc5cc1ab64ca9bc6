//! Acceptance criteria, one line each. Runs without the libtest harness so the
//! summary is always printed; exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use trivcheck::{cmd_analyze, PlanFlags};
use trivcheck_core::analysis::analyze;
use trivcheck_core::catalog::{generate_with, CatalogFamily};
use trivcheck_core::check::Verdict;
use trivcheck_core::classify::Family;
use trivcheck_core::expr::SamplePlan;
use trivcheck_core::suites::run_suite;

const BUDGET: Duration = Duration::from_secs(60);
const SEED: u64 = 42;

type Outcome = Result<String, String>;

/// Family, parameters, ε, κ, ν, trivialisable, label.
type Instance = (
    CatalogFamily,
    &'static [(&'static str, &'static str)],
    i8,
    f64,
    f64,
    Verdict,
    &'static str,
);

/// Runs a built-in suite and summarises it.
fn suite(name: &str) -> Outcome {
    let r = run_suite(name, SEED).expect("known suite");
    let failed: Vec<String> = r
        .failures()
        .take(5)
        .map(|c| format!("{} ({})", c.name, c.note.clone().unwrap_or_default()))
        .collect();
    if r.verdict == Verdict::Yes {
        Ok(format!("{} checks", r.checks.len()))
    } else {
        Err(format!(
            "{}/{} failed: {}",
            r.failures().count(),
            r.checks.len(),
            failed.join("; ")
        ))
    }
}

/// Largest |value − want| over the default sample points.
fn max_error(e: &trivcheck_core::expr::Expr, want: f64, base: &[f64]) -> f64 {
    let plan = SamplePlan::default();
    plan.evaluate(std::slice::from_ref(e), base)
        .samples
        .iter()
        .map(|s| (s.values[0] - want).abs())
        .fold(0.0, f64::max)
}

/// Named instances with independently known invariants.
fn named_instances() -> Outcome {
    // The trivial system with F = (e^{aw}, e^{bw}): λ1 = −ab, λ3 = a + b, so ε = −sign(ab) and
    // ν = |a + b| / √|ab|.
    let (a, b) = (1.0f64, 2.0f64);
    let nu_exp = (a + b).abs() / (a * b).abs().sqrt();
    let cases: [Instance; 4] = [
        (
            CatalogFamily::CompletelyFlat,
            &[("eps", "-1")],
            -1,
            0.0,
            0.0,
            Verdict::Yes,
            "elliptic",
        ),
        (
            CatalogFamily::CompletelyFlat,
            &[("eps", "1")],
            1,
            0.0,
            0.0,
            Verdict::Yes,
            "hyperbolic",
        ),
        (
            CatalogFamily::Trivial,
            &[("a", "1"), ("b", "2")],
            -1,
            0.0,
            nu_exp,
            Verdict::Yes,
            "(e^w, e^2w)",
        ),
        (
            CatalogFamily::FlatConstant,
            &[("eps", "1"), ("kappa", "1")],
            1,
            1.0,
            0.0,
            Verdict::No,
            "flat, kappa = 1",
        ),
    ];
    let plan = SamplePlan::default();
    let mut worst = 0.0f64;
    for (family, params, eps, kappa, nu, triv, name) in cases {
        let sys = generate_with(family, params).unwrap().spec.build().unwrap();
        let a = analyze(&sys, &plan);
        let inv = a
            .invariants
            .as_ref()
            .ok_or_else(|| format!("{name}: no invariants"))?;
        let t = a.report.trivialisable.as_ref().map(|t| t.verdict);
        let ek = max_error(&inv.kappa, kappa, &sys.base);
        let en = max_error(&inv.nu, nu, &sys.base);
        worst = worst.max(ek).max(en);
        if inv.epsilon != eps || ek > 1e-7 || en > 1e-7 || t != Some(triv) {
            return Err(format!(
                "{name}: epsilon {} kappa err {ek:e} nu err {en:e} trivialisable {t:?}",
                inv.epsilon
            ));
        }
    }
    let elliptic = generate_with(CatalogFamily::CompletelyFlat, &[("eps", "-1")]).unwrap();
    let fam = analyze(&elliptic.spec.build().unwrap(), &plan)
        .report
        .family;
    if fam != Some(Family::CompletelyFlat) {
        return Err(format!("elliptic family {fam:?}"));
    }
    Ok(format!(
        "named instances max error {worst:.1e}; nu(e^w, e^2w) = {nu_exp:.4}"
    ))
}

fn catalog_roundtrip() -> Outcome {
    let s = suite("catalog-roundtrip")?;
    let n = named_instances()?;
    Ok(format!("{s}; {n}"))
}

fn scratch_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("trivcheck-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Two binary runs and two library runs of `analyze --json` are byte-identical.
fn determinism() -> Outcome {
    let dir = scratch_dir();
    let file = dir.join("flat.json");
    let entry = generate_with(CatalogFamily::CentroFlat, &[("eps", "-1")]).unwrap();
    std::fs::write(&file, entry.spec.to_json()).unwrap();
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_trivcheck"))
            .args(["analyze", "--json", "--seed", "7"])
            .arg(&file)
            .output()
            .expect("binary runs");
        (out.status.code(), out.stdout)
    };
    let (first, second) = (run(), run());
    let flags = PlanFlags {
        seed: Some(7),
        ..PlanFlags::default()
    };
    let lib1 = cmd_analyze(&file, &flags, true).map_err(|e| e.to_string())?;
    let lib2 = cmd_analyze(&file, &flags, true).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    if first.0 != Some(0) {
        return Err(format!("exit code {:?}", first.0));
    }
    if first != second || lib1.text != lib2.text || lib1.text.as_bytes() != first.1.as_slice() {
        return Err("reports differ between runs".into());
    }
    Ok(format!("{} identical bytes", first.1.len()))
}

fn main() {
    #[allow(clippy::type_complexity)]
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 catalog round-trip", catalog_roundtrip),
        ("2 transformation rules", || suite("transform-rules")),
        ("3 structure relations", || suite("relations")),
        ("4 invariance", || suite("invariance")),
        ("5 symmetries", || suite("symmetry")),
        ("6 calculus", || suite("calculus")),
        ("7 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if elapsed > BUDGET {
            outcome = Err(format!("took {elapsed:.1?}, budget {BUDGET:?}"));
        }
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{elapsed:.2?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail} [{elapsed:.2?}]");
            }
        }
    }
    println!("acceptance: {}/7 criteria passed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
