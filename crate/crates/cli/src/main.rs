use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trivcheck::{
    cmd_analyze, cmd_catalog, cmd_symmetry, cmd_transform, cmd_verify, Output, PlanFlags,
    SymmetryRequest, Transform, VerifyTarget, EXIT_ERROR,
};

/// Feedback invariants, trivialisability and symmetries of control-affine systems.
///
/// Exit codes: 0 analyzed, 1 I/O, schema or parse error, 2 assumptions failed,
/// 3 inconclusive, 4 verification failed.
#[derive(Parser)]
#[command(name = "trivcheck", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Write the output to a file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Number of sample points.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Half-width of the sampling box around the base point.
    #[arg(long = "box", global = true, value_name = "HALF_WIDTH")]
    half_width: Option<f64>,
    /// Absolute and relative tolerance of identity tests.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed of the sample point stream (and of the random suites).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Assumptions, structure functions, invariants, trivialisability and family.
    Analyze { file: PathBuf },
    /// Generate a normal form as a system file with its expected results.
    Catalog {
        /// trivial, sigma-t1, sigma-t2, flat, centro-flat, centro-flat-constant,
        /// flat-constant, completely-flat, sigma-lambda or sigma-lambda-0k.
        family: String,
        #[command(flatten)]
        params: CatalogParams,
    },
    /// Apply feedback (u = alpha + beta v) or a change of coordinates.
    Transform {
        file: PathBuf,
        #[arg(
            long,
            allow_hyphen_values = true,
            requires = "beta",
            conflicts_with = "diffeo"
        )]
        alpha: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<String>,
        /// Forward and inverse maps as comma-separated component lists.
        #[arg(long, num_args = 2, value_names = ["FORWARD", "INVERSE"], allow_hyphen_values = true)]
        diffeo: Option<Vec<String>>,
    },
    /// Infinitesimal symmetries, abelian trivialisation and the rank condition.
    Symmetry {
        file: PathBuf,
        /// Candidate field as comma-separated components (repeatable).
        #[arg(long = "candidate", allow_hyphen_values = true)]
        candidates: Vec<String>,
        /// Check the candidates as commuting symmetries transversal to the controls.
        #[arg(long)]
        abelian: bool,
        /// Rank test for systems of the form x' = h(x, w), w' = u.
        #[arg(long)]
        rank_condition: bool,
    },
    /// Check a file against its expected block, or run a built-in suite.
    Verify {
        #[arg(required_unless_present = "suite", conflicts_with = "suite")]
        file: Option<PathBuf>,
        /// catalog-roundtrip, transform-rules, relations, invariance, symmetry,
        /// calculus or all.
        #[arg(long)]
        suite: Option<String>,
        /// Largest accepted sampled error of expected invariants.
        #[arg(long, default_value_t = 1e-7)]
        max_error: f64,
    },
}

#[derive(Args)]
struct CatalogParams {
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    nu: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    nu1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    nu0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<String>,
    /// Conformal factor r(x, y) for centro-flat.
    #[arg(long, allow_hyphen_values = true)]
    r: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Comma-separated eigenvalues.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Comma-separated 0/1 flags.
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
}

impl CatalogParams {
    fn into_map(self) -> BTreeMap<String, String> {
        [
            ("eps", self.eps),
            ("nu", self.nu),
            ("nu1", self.nu1),
            ("nu0", self.nu0),
            ("kappa", self.kappa),
            ("r", self.r),
            ("a", self.a),
            ("b", self.b),
            ("lambda", self.lambda),
            ("eta", self.eta),
            ("k", self.k),
        ]
        .into_iter()
        .filter_map(|(k, v)| Some((k.to_string(), v?)))
        .collect()
    }
}

fn run(cli: Cli) -> anyhow::Result<Output> {
    let flags = PlanFlags {
        samples: cli.samples,
        half_width: cli.half_width,
        tol: cli.tol,
        seed: cli.seed,
    };
    let json = cli.json;
    match cli.command {
        Command::Analyze { file } => cmd_analyze(&file, &flags, json),
        Command::Catalog { family, params } => cmd_catalog(&family, &params.into_map()),
        Command::Transform {
            file,
            alpha,
            beta,
            diffeo,
        } => {
            let t = match (diffeo, beta) {
                (Some(d), None) => Transform::Diffeo {
                    forward: d[0].clone(),
                    inverse: d[1].clone(),
                },
                (None, Some(beta)) => Transform::Feedback {
                    alpha: alpha.unwrap_or_else(|| "0".into()),
                    beta,
                },
                _ => anyhow::bail!("give either --alpha/--beta or --diffeo FORWARD INVERSE"),
            };
            cmd_transform(&file, &t, &flags)
        }
        Command::Symmetry {
            file,
            candidates,
            abelian,
            rank_condition,
        } => cmd_symmetry(
            &file,
            &SymmetryRequest {
                candidates,
                abelian,
                rank_condition,
            },
            &flags,
            json,
        ),
        Command::Verify {
            file,
            suite,
            max_error,
        } => {
            let target = match (&file, &suite) {
                (Some(f), None) => VerifyTarget::File(f),
                (None, Some(s)) => VerifyTarget::Suite(s),
                _ => anyhow::bail!("give either a file or --suite"),
            };
            cmd_verify(target, &flags, max_error, json)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    let out_path = cli.out.clone();
    match run(cli) {
        Ok(out) => {
            match &out_path {
                Some(p) => {
                    if let Err(e) = std::fs::write(p, &out.text) {
                        eprintln!("error: cannot write {}: {e}", p.display());
                        return ExitCode::from(EXIT_ERROR as u8);
                    }
                }
                None => {
                    let mut stdout = std::io::stdout().lock();
                    // A closed pipe (e.g. `| head`) is not an error of the analysis.
                    let _ = stdout
                        .write_all(out.text.as_bytes())
                        .and_then(|_| stdout.flush());
                }
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
