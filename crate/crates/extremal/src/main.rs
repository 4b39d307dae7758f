//! Command-line driver for the certification engine.
//!
//! Subcommands:
//!
//! - `solve <problem.json>` — direct-transcription solve; the report
//!   (cost + optimal process) goes to stdout, and `--out` additionally
//!   saves the optimum as a process file ready for `certify`.
//! - `certify <problem.json> <process.json>` — full certification: the
//!   report holds the certificate, and for normal extremals the
//!   cross-checked global-minimum certificate when one is issued.
//! - `refute <problem.json> <process.json>` — same run as `certify`, but
//!   exit 0 demands a refutation (not-extremal verdict).
//! - `penalize <problem.json> [--schedule W1,W2,...]` — state-constraint
//!   penalization sweep; the report is a convergence CSV.
//! - `example-l [--alpha A] [--grid N]` — built-in counterexample
//!   reproduction: certifies its zero candidate (expected: not extremal),
//!   contrasts with the classical conditions (expected: feasible with
//!   cost multiplier 1), and evaluates the improving family's cost.
//! - `selftest` — the full property suite, one line per check.
//!
//! Exit codes are a function of the outcome only:
//!
//! - 0 — success (`certify`: normal extremal; `refute`: not extremal).
//! - 2 — malformed input: unreadable/unparsable files, dimension
//!   mismatches, inadmissible candidates, bad flag values.
//! - 3 — numerical failure inside the engine, or a failed expectation in
//!   `example-l`/`selftest`.
//! - 4 — `solve` found no finite optimum (infeasible or unbounded).
//! - 10 — `certify`/`refute`: abnormal extremal.
//! - 20 — `certify`: not extremal; `refute`: certification succeeded, so
//!   the demanded refutation failed.
//!
//! Reports serialize every float with 17 significant digits, and
//! re-running a command on identical inputs yields byte-identical output.
//! The `EXTREMAL_CERTIFY_THREADS` environment variable caps the worker
//! count inside certification; it never affects reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use extremal::certify::{
    certify_extremal, check_classical, sufficiency_certificate, Certificate, CertifyError,
    CertifySettings, ClassicalVerdict, GlobalMinimum, Verdict,
};
use extremal::direct::{solve_direct, DirectError, DirectOutcome};
use extremal::example_l;
use extremal::files::{self, FilesError};
use extremal::linprog::{FarkasCertificate, LpSettings};
use extremal::model::{compile, eval_cost, LcProblem, ModelError};
use extremal::penalab::{run_schedule, schedule_csv, PenalabError, PenaltySchedule};
use extremal::report::to_json_pretty;
use extremal::selftest;

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_NO_OPTIMUM: u8 = 4;
const EXIT_ABNORMAL: u8 = 10;
const EXIT_NOT_EXTREMAL: u8 = 20;

#[derive(Parser)]
#[command(
    name = "extremal",
    version,
    about = "Certify, refute, or bound candidate solutions of state-constrained \
             linear-convex optimal control problems on a uniform grid"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the discrete problem by direct transcription
    Solve(SolveArgs),
    /// Certify a candidate: multipliers, refutation, or abnormality
    Certify(CertifyArgs),
    /// Certify, demanding a refutation: exit 0 only for not-extremal
    Refute(CertifyArgs),
    /// Sweep a penalty schedule and report value convergence as CSV
    Penalize(PenalizeArgs),
    /// Reproduce the built-in boundary-arc counterexample
    #[command(name = "example-l")]
    ExampleL(ExampleLArgs),
    /// Run the full property suite
    Selftest(SelftestArgs),
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("must be a positive finite number".to_string())
    }
}

fn parse_grid(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 2 {
        Ok(v)
    } else {
        Err("needs at least 2 grid intervals".to_string())
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file (JSON)
    problem: PathBuf,
    /// Re-grid the problem to N intervals before solving
    #[arg(long, value_name = "N", value_parser = parse_grid)]
    grid: Option<usize>,
    /// Simplex feasibility/optimality tolerance
    #[arg(long = "tol-lp", value_name = "TOL", value_parser = parse_positive,
          default_value_t = 1e-9)]
    tol_lp: f64,
    /// Also write the optimal process here as a process file (the report
    /// always goes to stdout)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    /// Problem file (JSON)
    problem: PathBuf,
    /// Candidate process file (JSON)
    process: PathBuf,
    /// Feasibility tolerance of the multiplier linear programs
    #[arg(long = "tol-lp", value_name = "TOL", value_parser = parse_positive,
          default_value_t = 1e-9)]
    tol_lp: f64,
    /// Candidate admissibility and constraint-activity tolerance
    /// [default: 1e-7 admissibility with data-scaled activity detection]
    #[arg(long = "tol-active", value_name = "TOL", value_parser = parse_positive)]
    tol_active: Option<f64>,
    /// Maximum acceptable recomputed pointwise-maximization gap
    #[arg(long = "tol-weierstrass", value_name = "TOL",
          value_parser = parse_positive, default_value_t = 1e-7)]
    tol_weierstrass: f64,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PenalizeArgs {
    /// Problem file (JSON)
    problem: PathBuf,
    /// Re-grid the problem to N intervals before the sweep
    #[arg(long, value_name = "N", value_parser = parse_grid)]
    grid: Option<usize>,
    /// Simplex feasibility/optimality tolerance
    #[arg(long = "tol-lp", value_name = "TOL", value_parser = parse_positive,
          default_value_t = 1e-9)]
    tol_lp: f64,
    /// Strictly increasing positive penalty weights
    /// [default: 1,4,16,64,256,1024]
    #[arg(long, value_name = "W1,W2,...", value_delimiter = ',',
          value_parser = parse_positive)]
    schedule: Option<Vec<f64>>,
    /// Write the CSV here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExampleLArgs {
    /// Improving-family parameter (expected family cost: -3a/4)
    #[arg(long, value_name = "A", value_parser = parse_positive,
          default_value_t = 0.2)]
    alpha: f64,
    /// Grid intervals for the table and the candidates
    #[arg(long, value_name = "N", value_parser = parse_grid,
          default_value_t = 200)]
    grid: usize,
    /// Feasibility tolerance of the multiplier linear programs
    #[arg(long = "tol-lp", value_name = "TOL", value_parser = parse_positive,
          default_value_t = 1e-9)]
    tol_lp: f64,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Run a single check by its 1-based index
    #[arg(long, value_name = "I")]
    only: Option<usize>,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// A run that stopped before producing its report.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<FilesError> for Failure {
    fn from(e: FilesError) -> Failure {
        Failure::input(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Failure {
        match e {
            // Solver or subdifferential breakdowns inside validation are
            // engine failures; everything else rejects the input.
            ModelError::Lp(_) | ModelError::Subdiff(_) => Failure::numerical(e.to_string()),
            _ => Failure::input(e.to_string()),
        }
    }
}

impl From<DirectError> for Failure {
    fn from(e: DirectError) -> Failure {
        match e {
            DirectError::Model(m) => m.into(),
            DirectError::Lp(_) | DirectError::Audit(_) => Failure::numerical(e.to_string()),
        }
    }
}

impl From<CertifyError> for Failure {
    fn from(e: CertifyError) -> Failure {
        match e {
            CertifyError::Model(m) => m.into(),
            _ => Failure::numerical(e.to_string()),
        }
    }
}

impl From<PenalabError> for Failure {
    fn from(e: PenalabError) -> Failure {
        match e {
            PenalabError::Model(m) => m.into(),
            PenalabError::Direct(d) => d.into(),
            PenalabError::Certify(c) => c.into(),
            PenalabError::Schedule(_) => Failure::input(e.to_string()),
            PenalabError::Aborted { .. } => Failure::numerical(e.to_string()),
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

/// Sends the report to `--out` when given, else to stdout.
fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_problem(path: &Path, regrid: Option<usize>) -> Result<LcProblem, Failure> {
    let problem = files::parse_problem(&read_file(path)?)?;
    match regrid {
        Some(n_steps) => Ok(problem.with_n_steps(n_steps)?),
        None => Ok(problem),
    }
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ProcessOut {
    x: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
}

#[derive(Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
enum SolveReport {
    Optimal {
        n_steps: usize,
        cost: f64,
        process: ProcessOut,
    },
    Infeasible {
        n_steps: usize,
        certificate: FarkasCertificate,
    },
    Unbounded {
        n_steps: usize,
    },
}

fn run_solve(args: &SolveArgs) -> Result<u8, Failure> {
    let problem = load_problem(&args.problem, args.grid)?;
    let settings = LpSettings {
        tol: args.tol_lp,
        ..LpSettings::default()
    };
    let n_steps = problem.grid.n_steps;
    let (report, code) = match solve_direct(&problem, &settings)? {
        DirectOutcome::Optimal { process, cost, .. } => {
            if let Some(path) = &args.out {
                write_file(path, &files::process_to_json(&process))?;
            }
            let report = SolveReport::Optimal {
                n_steps,
                cost,
                process: ProcessOut {
                    x: process.x,
                    u: process.u,
                },
            };
            (report, 0)
        }
        DirectOutcome::Infeasible { certificate } => (
            SolveReport::Infeasible {
                n_steps,
                certificate,
            },
            EXIT_NO_OPTIMUM,
        ),
        DirectOutcome::Unbounded { .. } => (SolveReport::Unbounded { n_steps }, EXIT_NO_OPTIMUM),
    };
    print!("{}", to_json_pretty(&report));
    Ok(code)
}

// ---------------------------------------------------------------------------
// certify / refute
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CertifyReport {
    certificate: Certificate,
    /// Present when the verdict is normal and the cross-checked
    /// sufficiency certificate was issued.
    global_minimum: Option<GlobalMinimum>,
    /// Why sufficiency was attempted but declined.
    sufficiency_note: Option<String>,
}

fn run_certify(args: &CertifyArgs, demand_refutation: bool) -> Result<u8, Failure> {
    let problem = files::parse_problem(&read_file(&args.problem)?)?;
    let process = files::parse_process(&read_file(&args.process)?)?;
    let admissibility_tol = args.tol_active.unwrap_or(1e-7);
    let mut table = compile(&problem, &process, admissibility_tol)?;
    if let Some(tol) = args.tol_active {
        for t in &mut table.tol_active {
            *t = tol;
        }
    }
    let settings = CertifySettings {
        lp_tol: args.tol_lp,
        weierstrass_tol: args.tol_weierstrass,
        admissibility_tol,
        ..CertifySettings::default()
    };
    let certificate = certify_extremal(&table, &settings)?;

    // Normal extremality of linear-convex data is sufficient for global
    // optimality; attach the cross-checked certificate whenever it can be
    // issued. A declined certificate is reported, never an exit condition:
    // exit codes depend on the verdict alone.
    let (global_minimum, sufficiency_note) = match &certificate.verdict {
        Verdict::NormalExtremal { multipliers } => {
            match sufficiency_certificate(&problem, &process, multipliers, &settings) {
                Ok(gm) => (Some(gm), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
        _ => (None, None),
    };
    let code = match &certificate.verdict {
        Verdict::NormalExtremal { .. } => {
            if demand_refutation {
                EXIT_NOT_EXTREMAL
            } else {
                0
            }
        }
        Verdict::AbnormalExtremal { .. } => EXIT_ABNORMAL,
        Verdict::NotExtremal { .. } => {
            if demand_refutation {
                0
            } else {
                EXIT_NOT_EXTREMAL
            }
        }
    };
    let report = CertifyReport {
        certificate,
        global_minimum,
        sufficiency_note,
    };
    emit(&to_json_pretty(&report), &args.out)?;
    Ok(code)
}

// ---------------------------------------------------------------------------
// penalize
// ---------------------------------------------------------------------------

fn run_penalize(args: &PenalizeArgs) -> Result<u8, Failure> {
    let problem = load_problem(&args.problem, args.grid)?;
    let schedule = match &args.schedule {
        Some(weights) => PenaltySchedule::new(weights.clone())?,
        None => PenaltySchedule::default_powers(),
    };
    let settings = LpSettings {
        tol: args.tol_lp,
        ..LpSettings::default()
    };
    let report = run_schedule(&problem, &schedule, &settings)?;
    emit(&schedule_csv(&report), &args.out)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// example-l
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ExampleLReport {
    alpha: f64,
    n_steps: usize,
    /// Cost of the zero candidate (expected: 0).
    candidate_cost: f64,
    /// Certification verdict for the zero candidate (expected:
    /// not_extremal, with every normalization mode refuted).
    verdict: String,
    refuted_modes: Vec<String>,
    /// The classical conditions by contrast admit multipliers (expected:
    /// cost multiplier 1 with a vanishing adjoint).
    classical: String,
    classical_lambda0: Option<f64>,
    classical_max_abs_p: Option<f64>,
    /// Cost of the improving family member at `alpha` (expected: -3a/4,
    /// strictly below the candidate).
    family_cost: f64,
    family_cost_expected: f64,
    family_cost_error: f64,
    expectations_met: bool,
}

fn run_example_l(args: &ExampleLArgs) -> Result<u8, Failure> {
    let n_steps = args.grid;
    let settings = CertifySettings {
        lp_tol: args.tol_lp,
        ..CertifySettings::default()
    };
    let table = example_l::example_l_table(n_steps);
    let certificate = certify_extremal(&table, &settings)?;
    let classical = check_classical(&table, &settings)?;

    let problem = example_l::face_problem(n_steps);
    let candidate_cost = eval_cost(&problem, &example_l::zero_candidate(n_steps))?;
    let family = example_l::improving_family(n_steps, args.alpha);
    let family_cost = eval_cost(&problem, &family)?;
    let family_cost_expected = -0.75 * args.alpha;
    let family_cost_error = family_cost - family_cost_expected;

    let (verdict, refuted_modes) = match &certificate.verdict {
        Verdict::NormalExtremal { .. } => ("normal_extremal".to_string(), vec![]),
        Verdict::AbnormalExtremal { mode, .. } => {
            ("abnormal_extremal".to_string(), vec![mode.label()])
        }
        Verdict::NotExtremal { refutations } => (
            "not_extremal".to_string(),
            refutations.iter().map(|r| r.mode.label()).collect(),
        ),
    };
    let (classical_name, classical_lambda0, classical_max_abs_p) = match &classical {
        ClassicalVerdict::Feasible { multipliers, .. } => {
            let max_p = multipliers
                .p
                .iter()
                .flatten()
                .fold(0.0f64, |acc, v| acc.max(v.abs()));
            (
                "feasible".to_string(),
                Some(multipliers.lambda0),
                Some(max_p),
            )
        }
        ClassicalVerdict::Infeasible { .. } => ("infeasible".to_string(), None, None),
    };

    // The discretized family cost converges to -3a/4 at first order in
    // 1/N; the acceptance window scales accordingly.
    let family_tol = 10.0 * args.alpha / n_steps as f64;
    let expectations_met = matches!(certificate.verdict, Verdict::NotExtremal { .. })
        && classical_lambda0 == Some(1.0)
        && classical_max_abs_p.is_some_and(|v| v <= 1e-7)
        && candidate_cost.abs() <= 1e-12
        && family_cost_error.abs() <= family_tol;

    let report = ExampleLReport {
        alpha: args.alpha,
        n_steps,
        candidate_cost,
        verdict,
        refuted_modes,
        classical: classical_name,
        classical_lambda0,
        classical_max_abs_p,
        family_cost,
        family_cost_expected,
        family_cost_error,
        expectations_met,
    };
    emit(&to_json_pretty(&report), &args.out)?;
    Ok(if expectations_met { 0 } else { EXIT_NUMERICAL })
}

// ---------------------------------------------------------------------------
// selftest
// ---------------------------------------------------------------------------

fn run_selftest(args: &SelftestArgs) -> Result<u8, Failure> {
    let outcomes = match args.only {
        Some(index) => {
            let outcome = selftest::run_one(index).ok_or_else(|| {
                Failure::input(format!("check index {index} is out of range (1..=8)"))
            })?;
            vec![outcome]
        }
        None => selftest::run_all(),
    };
    let mut text = String::new();
    let mut failures = 0usize;
    for outcome in &outcomes {
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        if !outcome.passed {
            failures += 1;
        }
        let _ = writeln!(
            text,
            "criterion {} [{status}] {}: {}",
            outcome.index, outcome.name, outcome.details
        );
    }
    let _ = writeln!(
        text,
        "selftest: {}/{} checks passed",
        outcomes.len() - failures,
        outcomes.len()
    );
    emit(&text, &args.out)?;
    Ok(if failures == 0 { 0 } else { EXIT_NUMERICAL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Certify(args) => run_certify(args, false),
        Command::Refute(args) => run_certify(args, true),
        Command::Penalize(args) => run_penalize(args),
        Command::ExampleL(args) => run_example_l(args),
        Command::Selftest(args) => run_selftest(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
