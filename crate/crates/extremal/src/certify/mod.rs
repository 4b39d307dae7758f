//! Multiplier search, refutation, and optimality certificates for a
//! candidate process.
//!
//! Given a compiled [`ExtremalDataTable`], the discrete stationarity system
//! asks for an adjoint arc `p`, a cost multiplier `lambda0 >= 0`, measure
//! atoms `mu_k >= 0` with gradient selections `gamma_k`, and witness
//! weights, satisfying
//!
//! * nontriviality: `lambda0 + sum_k mu_k + |p(a)|` positive,
//! * the adjoint inclusion per interval (see [`build`]),
//! * the sampled pointwise-maximization inequalities,
//! * transversality at both endpoints,
//! * gradient selection `gamma_k` from the sharp state-constraint
//!   subdifferential, and
//! * support of the atoms inside the active set `h_k >= -tol_active`,
//!
//! where `q_k = p_k + sum_{j<k} gamma_j mu_j` for `k < N` and the closed
//! sum `q_N = p_N + sum_{j<=N} gamma_j mu_j` at the right endpoint.
//!
//! Nontriviality is an open condition on a cone, so it is replaced by the
//! exhaustive normalization family [`Normalization::family`]: the normal
//! mode `lambda0 = 1`, the abnormal-measure mode `lambda0 = 0, sum mu = 1`,
//! and `2n` abnormal-adjoint modes `lambda0 = 0, mu = 0, p_i(a) = ±1,
//! |p_j(a)| <= 1`. Any nonzero multiplier tuple scales into exactly one
//! mode (a zero measure and zero `p(a)` force `p` identically zero through
//! the linear adjoint recursion), so infeasibility of every member refutes
//! extremality outright — each refutation carrying an independently
//! verified Farkas certificate.
//!
//! For linear-convex problem data the conditions with `lambda0 = 1` are
//! also sufficient for global optimality; [`sufficiency_certificate`]
//! issues that verdict only after cross-checking the candidate cost
//! against the independent direct transcription.

pub mod build;

pub use build::{build_multiplier_lp, MultiplierLp, VarLayout};

use serde::Serialize;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::direct::{solve_direct, DirectError, DirectOutcome};
use crate::linprog::{solve_lp, verify_farkas, FarkasCertificate, LpError, LpOutcome, LpSettings};
use crate::model::{
    check_admissible, eval_cost, ExtremalDataTable, LcProblem, ModelError, Process, TableOrigin,
};

use build::{build_lp, extract_multipliers, LpVariant};

/// Errors from certification and sufficiency checking.
#[derive(Debug)]
pub enum CertifyError {
    Model(ModelError),
    Lp(LpError),
    /// The table cannot carry the multiplier system (for example, an
    /// active node with an empty sharp subdifferential).
    Structural(String),
    /// A positive atom has no gradient selection.
    MissingGamma {
        node: usize,
    },
    /// Sufficiency requires the normal mode.
    NotNormal {
        lambda0: f64,
    },
    /// Sufficiency requires linear-convex problem data.
    NotLinearConvex {
        label: String,
    },
    /// The candidate cost and the direct-transcription optimum disagree.
    CrossCheckFailed {
        candidate_cost: f64,
        direct_cost: f64,
        tolerance: f64,
    },
    /// An internal consistency check failed; indicates a bug.
    Internal(String),
}

impl fmt::Display for CertifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertifyError::Model(e) => write!(f, "model error: {e}"),
            CertifyError::Lp(e) => write!(f, "linear program error: {e}"),
            CertifyError::Structural(msg) => {
                write!(f, "structural error: {msg}")
            }
            CertifyError::MissingGamma { node } => write!(
                f,
                "no gradient selection at node {node} with a positive atom"
            ),
            CertifyError::NotNormal { lambda0 } => write!(
                f,
                "sufficiency requires the normal mode (lambda0 = 1), got \
                 lambda0 = {lambda0}"
            ),
            CertifyError::NotLinearConvex { label } => write!(
                f,
                "sufficiency requires linear-convex problem data; table \
                 '{label}' is hand-coded"
            ),
            CertifyError::CrossCheckFailed {
                candidate_cost,
                direct_cost,
                tolerance,
            } => write!(
                f,
                "cross-check failed: candidate cost {candidate_cost} vs \
                 direct optimum {direct_cost} (tolerance {tolerance})"
            ),
            CertifyError::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for CertifyError {}

impl From<ModelError> for CertifyError {
    fn from(e: ModelError) -> Self {
        CertifyError::Model(e)
    }
}

impl From<LpError> for CertifyError {
    fn from(e: LpError) -> Self {
        CertifyError::Lp(e)
    }
}

impl From<DirectError> for CertifyError {
    fn from(e: DirectError) -> Self {
        match e {
            DirectError::Model(e) => CertifyError::Model(e),
            DirectError::Lp(e) => CertifyError::Lp(e),
            DirectError::Audit(msg) => CertifyError::Internal(msg),
        }
    }
}

/// One member of the nontriviality normalization family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `lambda0 = 1`.
    Normal,
    /// `lambda0 = 0`, total measure mass 1.
    AbnormalMeasure,
    /// `lambda0 = 0`, zero measure, `p_component(a) = ±1` with the other
    /// starting components bounded by 1 in absolute value.
    AbnormalAdjoint { component: usize, positive: bool },
}

impl Normalization {
    /// The constant the mode substitutes for the cost multiplier.
    pub fn lambda0(&self) -> f64 {
        match self {
            Normalization::Normal => 1.0,
            _ => 0.0,
        }
    }

    /// The full family for an `n`-state system, normal mode first:
    /// `2 + 2n` members, exhausting the rays of the multiplier cone.
    pub fn family(n: usize) -> Vec<Normalization> {
        let mut modes = vec![Normalization::Normal, Normalization::AbnormalMeasure];
        for component in 0..n {
            for positive in [true, false] {
                modes.push(Normalization::AbnormalAdjoint {
                    component,
                    positive,
                });
            }
        }
        modes
    }

    /// Short human-readable name for reports and logs.
    pub fn label(&self) -> String {
        match self {
            Normalization::Normal => "normal".to_string(),
            Normalization::AbnormalMeasure => "abnormal-measure".to_string(),
            Normalization::AbnormalAdjoint {
                component,
                positive,
            } => format!(
                "abnormal-adjoint({}{component})",
                if *positive { '+' } else { '-' }
            ),
        }
    }
}

/// A solution of the discrete multiplier system.
#[derive(Debug, Clone, Serialize)]
pub struct MultiplierSet {
    /// Adjoint arc at nodes `0..=N` (the absolutely continuous part).
    pub p: Vec<Vec<f64>>,
    /// Cost multiplier.
    pub lambda0: f64,
    /// Measure atoms at nodes `0..=N`.
    pub mu: Vec<f64>,
    /// Gradient selection per node: meaningful wherever `mu_k > 0`, kept
    /// at the table's first generator elsewhere for determinism, `None`
    /// only where the table offers no generator at all.
    pub gamma: Vec<Option<Vec<f64>>>,
    /// Derived measure-corrected adjoint at nodes `0..=N`: strict atom
    /// prefix sums for `k < N`, the closed sum at `k = N`.
    pub q: Vec<Vec<f64>>,
}

impl MultiplierSet {
    /// The normalized nontriviality functional
    /// `lambda0 + sum_k mu_k + max_i |p_i(a)|`.
    pub fn nontriviality(&self) -> f64 {
        let p0 = self
            .p
            .first()
            .map_or(0.0, |p| p.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
        self.lambda0 + self.mu.iter().sum::<f64>() + p0
    }
}

fn check_ms_dims(ms: &MultiplierSet, table: &ExtremalDataTable) -> Result<(), CertifyError> {
    let nodes = table.grid.n_steps + 1;
    if ms.p.len() != nodes || ms.mu.len() != nodes || ms.gamma.len() != nodes {
        return Err(CertifyError::Structural(format!(
            "multiplier set has {} adjoint nodes, {} atoms, {} selections; \
             expected {nodes} of each",
            ms.p.len(),
            ms.mu.len(),
            ms.gamma.len()
        )));
    }
    for (k, pk) in ms.p.iter().enumerate() {
        if pk.len() != table.n {
            return Err(CertifyError::Structural(format!(
                "adjoint at node {k} has dimension {}, expected {}",
                pk.len(),
                table.n
            )));
        }
    }
    Ok(())
}

/// The scaled atom `gamma_k mu_k`, or `None` for a zero atom.
fn atom_term(ms: &MultiplierSet, k: usize, n: usize) -> Result<Option<Vec<f64>>, CertifyError> {
    if ms.mu[k] == 0.0 {
        return Ok(None);
    }
    if ms.mu[k] < 0.0 {
        return Err(CertifyError::Structural(format!(
            "negative measure atom {} at node {k}",
            ms.mu[k]
        )));
    }
    let gamma = ms.gamma[k]
        .as_ref()
        .ok_or(CertifyError::MissingGamma { node: k })?;
    if gamma.len() != n {
        return Err(CertifyError::Structural(format!(
            "gradient selection at node {k} has dimension {}, expected {n}",
            gamma.len()
        )));
    }
    Ok(Some(gamma.iter().map(|g| g * ms.mu[k]).collect()))
}

/// Assembles the measure-corrected adjoint at the nodes:
/// `q_k = p_k + sum_{j<k} gamma_j mu_j` for `k < N`, and the closed sum
/// `q_N = p_N + sum_{j<=N} gamma_j mu_j` at the right endpoint.
pub fn assemble_q(
    ms: &MultiplierSet,
    table: &ExtremalDataTable,
) -> Result<Vec<Vec<f64>>, CertifyError> {
    check_ms_dims(ms, table)?;
    let n = table.n;
    let n_steps = table.grid.n_steps;
    let mut prefix = vec![0.0; n];
    let mut q = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        let qk: Vec<f64> = ms.p[k].iter().zip(&prefix).map(|(p, s)| p + s).collect();
        q.push(qk);
        if let Some(term) = atom_term(ms, k, n)? {
            for (s, t) in prefix.iter_mut().zip(&term) {
                *s += t;
            }
        }
    }
    // Closed sum at the right endpoint: include every atom.
    q[n_steps] = ms.p[n_steps]
        .iter()
        .zip(&prefix)
        .map(|(p, s)| p + s)
        .collect();
    Ok(q)
}

/// Assembles the interval values `qt_k = p_k + sum_{j<=k} gamma_j mu_j`
/// used by the adjoint, stationarity, and maximization rows.
pub(crate) fn assemble_q_intervals(
    ms: &MultiplierSet,
    table: &ExtremalDataTable,
) -> Result<Vec<Vec<f64>>, CertifyError> {
    check_ms_dims(ms, table)?;
    let n = table.n;
    let mut prefix = vec![0.0; n];
    let mut q = Vec::with_capacity(table.grid.n_steps);
    for k in 0..table.grid.n_steps {
        if let Some(term) = atom_term(ms, k, n)? {
            for (s, t) in prefix.iter_mut().zip(&term) {
                *s += t;
            }
        }
        q.push(ms.p[k].iter().zip(&prefix).map(|(p, s)| p + s).collect());
    }
    Ok(q)
}

/// Per-interval pointwise-maximization audit of a multiplier set,
/// recomputed from the raw sample data outside any linear program.
#[derive(Debug, Clone, Serialize)]
pub struct WeierstrassReport {
    /// `gaps[k] = max_s (qt_k . f_s - lambda0 L_s) - (qt_k . f* - lambda0 L*)`.
    pub gaps: Vec<f64>,
    /// Sample index attaining each gap (0 is the candidate itself).
    pub argmax: Vec<usize>,
    pub tol: f64,
}

impl WeierstrassReport {
    pub fn passes(&self) -> bool {
        self.gaps.iter().all(|&g| g <= self.tol)
    }

    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().fold(0.0f64, |acc, &g| acc.max(g))
    }
}

/// Re-evaluates the sampled maximization condition for a multiplier set.
///
/// The candidate must attain the per-interval maximum of
/// `qt_k . f - lambda0 L` over the recorded samples up to `tol`; the gap
/// is how far above the candidate value the best sample reaches.
pub fn check_weierstrass(
    table: &ExtremalDataTable,
    ms: &MultiplierSet,
    tol: f64,
) -> Result<WeierstrassReport, CertifyError> {
    let qt = assemble_q_intervals(ms, table)?;
    let mut gaps = Vec::with_capacity(table.grid.n_steps);
    let mut argmax = Vec::with_capacity(table.grid.n_steps);
    for k in 0..table.grid.n_steps {
        let value = |fval: &[f64], lval: f64| -> f64 {
            let dot: f64 = qt[k].iter().zip(fval).map(|(a, b)| a * b).sum();
            dot - ms.lambda0 * lval
        };
        let (f_star, l_star) = &table.wsamples[k][0];
        let candidate = value(f_star, *l_star);
        let mut best = 0.0f64;
        let mut best_index = 0usize;
        for (s, (fval, lval)) in table.wsamples[k].iter().enumerate() {
            let gap = value(fval, *lval) - candidate;
            if gap > best {
                best = gap;
                best_index = s;
            }
        }
        gaps.push(best);
        argmax.push(best_index);
    }
    Ok(WeierstrassReport { gaps, argmax, tol })
}

/// Tolerances and worker count for certification runs.
///
/// The thread count is excluded from serialized reports so output bytes
/// do not depend on the execution environment.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CertifySettings {
    /// Feasibility tolerance handed to the simplex solver.
    pub lp_tol: f64,
    /// Maximum acceptable recomputed maximization gap.
    pub weierstrass_tol: f64,
    /// Maximum acceptable candidate-vs-direct cost disagreement for
    /// sufficiency certificates.
    pub cross_check_tol: f64,
    /// Admissibility tolerance for the candidate re-check in
    /// [`sufficiency_certificate`].
    pub admissibility_tol: f64,
    /// Worker threads for the normalization family (defaults to the
    /// `EXTREMAL_CERTIFY_THREADS` environment variable, else 1); verdicts
    /// and reports are identical for any value.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for CertifySettings {
    fn default() -> Self {
        let threads = std::env::var("EXTREMAL_CERTIFY_THREADS")
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&t| t >= 1)
            .unwrap_or(1);
        CertifySettings {
            lp_tol: 1e-9,
            weierstrass_tol: 1e-7,
            cross_check_tol: 1e-6,
            admissibility_tol: 1e-7,
            threads,
        }
    }
}

impl CertifySettings {
    fn lp_settings(&self) -> LpSettings {
        LpSettings {
            tol: self.lp_tol,
            ..LpSettings::default()
        }
    }
}

/// Result of one normalization-mode search.
#[derive(Debug, Clone)]
pub enum FindOutcome {
    Feasible(MultiplierSet),
    /// The mode's program is infeasible; the certificate has been checked
    /// against the program by [`verify_farkas`].
    Infeasible(FarkasCertificate),
}

/// Searches one normalization mode for multipliers.
///
/// Feasible modes return the canonical multiplier set minimizing
/// `sum_k |p_k|_1 + sum_k mu_k`; infeasible modes return a verified
/// Farkas certificate.
pub fn find_multipliers(
    table: &ExtremalDataTable,
    mode: Normalization,
    settings: &CertifySettings,
) -> Result<FindOutcome, CertifyError> {
    solve_mode(table, mode, false, settings)
}

fn solve_mode(
    table: &ExtremalDataTable,
    mode: Normalization,
    classical: bool,
    settings: &CertifySettings,
) -> Result<FindOutcome, CertifyError> {
    let built = build_lp(table, LpVariant::Mode(mode), classical)?;
    match solve_lp(&built.lp, &settings.lp_settings())? {
        LpOutcome::Optimal { x, .. } => {
            let ms = extract_multipliers(&x, &built.layout, table, mode.lambda0())?;
            for (k, &atom) in ms.mu.iter().enumerate() {
                if atom > 0.0 && !table.active(k) {
                    return Err(CertifyError::Internal(format!(
                        "atom {atom} escaped the active set at node {k}"
                    )));
                }
            }
            if ms.nontriviality() < 1.0 - 1e-9 {
                return Err(CertifyError::Internal(format!(
                    "mode {} returned a multiplier set with nontriviality \
                     {}",
                    mode.label(),
                    ms.nontriviality()
                )));
            }
            Ok(FindOutcome::Feasible(ms))
        }
        LpOutcome::Infeasible { certificate } => {
            if !verify_farkas(&built.lp, &certificate, settings.lp_tol)? {
                return Err(CertifyError::Internal(format!(
                    "unverifiable infeasibility certificate in mode {}",
                    mode.label()
                )));
            }
            Ok(FindOutcome::Infeasible(certificate))
        }
        LpOutcome::Unbounded { .. } => Err(CertifyError::Internal(format!(
            "multiplier program unbounded in mode {} despite nonnegative \
             objective",
            mode.label()
        ))),
    }
}

/// One refuted normalization mode with its verified certificate.
#[derive(Debug, Clone, Serialize)]
pub struct RefutedMode {
    pub mode: Normalization,
    pub certificate: FarkasCertificate,
}

/// The certification verdict for a candidate process.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Multipliers exist with `lambda0 = 1`.
    NormalExtremal { multipliers: MultiplierSet },
    /// Multipliers exist only in an abnormal mode.
    AbnormalExtremal {
        mode: Normalization,
        multipliers: MultiplierSet,
    },
    /// Every normalization mode is infeasible: no nonzero multiplier
    /// tuple exists, so the candidate is not an extremal.
    NotExtremal { refutations: Vec<RefutedMode> },
}

/// Verdict for the classical conditions (control rows dropped, state
/// components of the running-cost generators only).
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalVerdict {
    Feasible {
        mode: Normalization,
        multipliers: MultiplierSet,
    },
    Infeasible {
        refutations: Vec<RefutedMode>,
    },
}

/// Full certification output: verdict, maximization audit, classical
/// comparison, and the tolerances that produced them.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub verdict: Verdict,
    /// Present whenever some multiplier set exists to evaluate (from the
    /// verdict, else from the classical verdict).
    pub weierstrass: Option<WeierstrassReport>,
    pub classical: ClassicalVerdict,
    pub settings: CertifySettings,
    /// Largest node-activity tolerance of the table.
    pub tol_active_max: f64,
}

enum FamilyResult {
    Found {
        mode: Normalization,
        ms: MultiplierSet,
    },
    Refuted(Vec<RefutedMode>),
}

fn run_family(
    table: &ExtremalDataTable,
    classical: bool,
    settings: &CertifySettings,
) -> Result<FamilyResult, CertifyError> {
    let family = Normalization::family(table.n);
    let mut refuted = Vec::with_capacity(family.len());
    match solve_mode(table, family[0], classical, settings)? {
        FindOutcome::Feasible(ms) => {
            return Ok(FamilyResult::Found {
                mode: family[0],
                ms,
            })
        }
        FindOutcome::Infeasible(certificate) => refuted.push(RefutedMode {
            mode: family[0],
            certificate,
        }),
    }
    let abnormal = &family[1..];
    let outcomes: Vec<Result<FindOutcome, CertifyError>> =
        if settings.threads <= 1 || abnormal.len() <= 1 {
            let mut outcomes = Vec::with_capacity(abnormal.len());
            for &mode in abnormal {
                let outcome = solve_mode(table, mode, classical, settings)?;
                let feasible = matches!(outcome, FindOutcome::Feasible(_));
                outcomes.push(Ok(outcome));
                if feasible {
                    break;
                }
            }
            outcomes
        } else {
            let slots: Mutex<Vec<Option<Result<FindOutcome, CertifyError>>>> =
                Mutex::new((0..abnormal.len()).map(|_| None).collect());
            let next = AtomicUsize::new(0);
            std::thread::scope(|scope| {
                for _ in 0..settings.threads.min(abnormal.len()) {
                    scope.spawn(|| loop {
                        let idx = next.fetch_add(1, Ordering::Relaxed);
                        if idx >= abnormal.len() {
                            break;
                        }
                        let outcome = solve_mode(table, abnormal[idx], classical, settings);
                        slots.lock().unwrap()[idx] = Some(outcome);
                    });
                }
            });
            slots
                .into_inner()
                .unwrap()
                .into_iter()
                .map(|slot| {
                    slot.unwrap_or_else(|| {
                        Err(CertifyError::Internal(
                            "a normalization-mode worker left its slot \
                             empty"
                                .to_string(),
                        ))
                    })
                })
                .collect()
        };
    for (&mode, outcome) in abnormal.iter().zip(outcomes) {
        match outcome? {
            FindOutcome::Feasible(ms) => return Ok(FamilyResult::Found { mode, ms }),
            FindOutcome::Infeasible(certificate) => refuted.push(RefutedMode { mode, certificate }),
        }
    }
    Ok(FamilyResult::Refuted(refuted))
}

/// Runs the full normalization family and assembles the certificate.
///
/// The normal mode is decided first; abnormal modes run only when the
/// normal program is infeasible (concurrently when
/// [`CertifySettings::threads`] exceeds one — the verdict is identical
/// either way). The classical comparison and, where any multipliers
/// exist, the recomputed maximization audit are always attached.
pub fn certify_extremal(
    table: &ExtremalDataTable,
    settings: &CertifySettings,
) -> Result<Certificate, CertifyError> {
    table.validate()?;
    let verdict = match run_family(table, false, settings)? {
        FamilyResult::Found {
            mode: Normalization::Normal,
            ms,
        } => Verdict::NormalExtremal { multipliers: ms },
        FamilyResult::Found { mode, ms } => Verdict::AbnormalExtremal {
            mode,
            multipliers: ms,
        },
        FamilyResult::Refuted(refutations) => Verdict::NotExtremal { refutations },
    };
    let classical = match run_family(table, true, settings)? {
        FamilyResult::Found { mode, ms } => ClassicalVerdict::Feasible {
            mode,
            multipliers: ms,
        },
        FamilyResult::Refuted(refutations) => ClassicalVerdict::Infeasible { refutations },
    };
    let audit_ms = match &verdict {
        Verdict::NormalExtremal { multipliers } | Verdict::AbnormalExtremal { multipliers, .. } => {
            Some(multipliers)
        }
        Verdict::NotExtremal { .. } => match &classical {
            ClassicalVerdict::Feasible { multipliers, .. } => Some(multipliers),
            ClassicalVerdict::Infeasible { .. } => None,
        },
    };
    let weierstrass = match audit_ms {
        Some(ms) => Some(check_weierstrass(table, ms, settings.weierstrass_tol)?),
        None => None,
    };
    let tol_active_max = table.tol_active.iter().fold(0.0f64, |acc, &t| acc.max(t));
    Ok(Certificate {
        verdict,
        weierstrass,
        classical,
        settings: *settings,
        tol_active_max,
    })
}

/// Runs the normalization family on the classical conditions.
pub fn check_classical(
    table: &ExtremalDataTable,
    settings: &CertifySettings,
) -> Result<ClassicalVerdict, CertifyError> {
    Ok(match run_family(table, true, settings)? {
        FamilyResult::Found { mode, ms } => ClassicalVerdict::Feasible {
            mode,
            multipliers: ms,
        },
        FamilyResult::Refuted(refutations) => ClassicalVerdict::Infeasible { refutations },
    })
}

/// Tests whether a given multiplier set satisfies the classical
/// conditions: `p`, `mu`, and the selections are pinned and only the
/// witness weights are searched.
pub fn check_multipliers_classical(
    table: &ExtremalDataTable,
    ms: &MultiplierSet,
    settings: &CertifySettings,
) -> Result<bool, CertifyError> {
    let built = build_lp(table, LpVariant::Pinned(ms), true)?;
    match solve_lp(&built.lp, &settings.lp_settings())? {
        LpOutcome::Optimal { .. } => Ok(true),
        LpOutcome::Infeasible { .. } => Ok(false),
        LpOutcome::Unbounded { .. } => Err(CertifyError::Internal(
            "pinned multiplier program unbounded despite nonnegative \
             objective"
                .to_string(),
        )),
    }
}

/// A global-optimality certificate for a normal extremal of a
/// linear-convex problem, with its independent cost cross-check.
#[derive(Debug, Clone, Serialize)]
pub struct GlobalMinimum {
    pub candidate_cost: f64,
    pub direct_cost: f64,
    /// `candidate_cost - direct_cost`; within `tolerance` in magnitude.
    pub gap: f64,
    pub tolerance: f64,
}

/// Issues a global-optimality certificate for a normal extremal.
///
/// For linear-convex data, multipliers with `lambda0 = 1` certify a
/// minimum. This is only issued after re-validating the problem class,
/// re-checking candidate admissibility, and cross-checking the candidate
/// cost against the independent direct transcription on the same grid —
/// a disagreement beyond tolerance signals a discretization or encoding
/// bug and refuses the certificate.
pub fn sufficiency_certificate(
    problem: &LcProblem,
    process: &Process,
    ms: &MultiplierSet,
    settings: &CertifySettings,
) -> Result<GlobalMinimum, CertifyError> {
    if ms.lambda0 != 1.0 {
        return Err(CertifyError::NotNormal {
            lambda0: ms.lambda0,
        });
    }
    problem.validate(settings.admissibility_tol)?;
    let report = check_admissible(problem, process, settings.admissibility_tol)?;
    if !report.admissible() {
        return Err(CertifyError::Model(ModelError::Inadmissible(Box::new(
            report,
        ))));
    }
    let candidate_cost = eval_cost(problem, process)?;
    let direct_cost = match solve_direct(problem, &settings.lp_settings())? {
        DirectOutcome::Optimal { cost, .. } => cost,
        DirectOutcome::Infeasible { .. } => {
            return Err(CertifyError::Internal(
                "direct transcription infeasible although the candidate \
                 is admissible"
                    .to_string(),
            ))
        }
        DirectOutcome::Unbounded { .. } => {
            return Err(CertifyError::Internal(
                "direct transcription unbounded during the sufficiency \
                 cross-check"
                    .to_string(),
            ))
        }
    };
    let gap = candidate_cost - direct_cost;
    if gap.abs() > settings.cross_check_tol {
        return Err(CertifyError::CrossCheckFailed {
            candidate_cost,
            direct_cost,
            tolerance: settings.cross_check_tol,
        });
    }
    Ok(GlobalMinimum {
        candidate_cost,
        direct_cost,
        gap,
        tolerance: settings.cross_check_tol,
    })
}

/// Sufficiency via a table's provenance: available only for tables
/// compiled from linear-convex data.
pub fn sufficiency_from_table(
    table: &ExtremalDataTable,
    ms: &MultiplierSet,
    settings: &CertifySettings,
) -> Result<GlobalMinimum, CertifyError> {
    match &table.origin {
        TableOrigin::LinearConvex { problem, process } => {
            sufficiency_certificate(problem, process, ms, settings)
        }
        TableOrigin::HandCoded { label } => Err(CertifyError::NotLinearConvex {
            label: label.clone(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AffinePiece, Grid, MaxAffine, PerNode, Polytope, PwaSum};
    use crate::testbed::{riding_optimum, riding_problem};

    fn riding_table(n_steps: usize) -> ExtremalDataTable {
        let problem = riding_problem(n_steps);
        let process = riding_optimum(n_steps);
        crate::model::compile(&problem, &process, 1e-9).unwrap()
    }

    /// Endpoint-cost instance: minimize x(b), x' = u on [0, 1],
    /// u in [-1, 1], x(0) = 0, no state constraint.
    fn steer_down_problem(n_steps: usize) -> LcProblem {
        let endpoint_cost = PwaSum {
            terms: vec![MaxAffine {
                pieces: vec![AffinePiece {
                    gradient: vec![0.0, 1.0],
                    offset: 0.0,
                }],
            }],
        };
        let endpoint_set = Polytope {
            dim: 2,
            c: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            d: vec![0.0, 0.0],
        };
        LcProblem::new(
            Grid::new(0.0, 1.0, n_steps).unwrap(),
            PerNode::Constant(vec![vec![0.0]]),
            PerNode::Constant(vec![vec![1.0]]),
            PerNode::Constant(vec![0.0]),
            PerNode::Constant(-1.0),
            PerNode::Constant(PwaSum::zero()),
            endpoint_cost,
            PerNode::Constant(Polytope::hyperbox(1, -1.0, 1.0)),
            endpoint_set,
            PerNode::Constant(vec![vec![-1.0], vec![1.0]]),
        )
    }

    fn steer_process(n_steps: usize, u_const: f64) -> Process {
        let dt = 1.0 / n_steps as f64;
        let x = (0..=n_steps)
            .map(|k| vec![u_const * k as f64 * dt])
            .collect();
        let u = (0..n_steps).map(|_| vec![u_const]).collect();
        Process { x, u }
    }

    #[test]
    fn q_assembly_matches_the_atom_prefix_rules() {
        let table = riding_table(2);
        let base = MultiplierSet {
            p: vec![vec![1.0], vec![2.0], vec![3.0]],
            lambda0: 1.0,
            mu: vec![0.0; 3],
            gamma: vec![None, None, None],
            q: Vec::new(),
        };
        // Null measure: q = p everywhere.
        let q = assemble_q(&base, &table).unwrap();
        assert_eq!(q, vec![vec![1.0], vec![2.0], vec![3.0]]);

        // Single atom at node 0: excluded from its own node for interior
        // times, included from node 1 on.
        let mut first = base.clone();
        first.mu[0] = 1.0;
        first.gamma[0] = Some(vec![5.0]);
        let q = assemble_q(&first, &table).unwrap();
        assert_eq!(q, vec![vec![1.0], vec![7.0], vec![8.0]]);
        let qt = assemble_q_intervals(&first, &table).unwrap();
        assert_eq!(qt, vec![vec![6.0], vec![7.0]]);

        // Atom only at the final node: visible only in the closed value.
        let mut last = base.clone();
        last.mu[2] = 2.0;
        last.gamma[2] = Some(vec![-1.0]);
        let q = assemble_q(&last, &table).unwrap();
        assert_eq!(q, vec![vec![1.0], vec![2.0], vec![1.0]]);

        // Positive atom without a selection is an error.
        let mut broken = base;
        broken.mu[1] = 0.5;
        match assemble_q(&broken, &table) {
            Err(CertifyError::MissingGamma { node: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn the_normalization_family_covers_two_plus_two_n_modes() {
        let family = Normalization::family(2);
        assert_eq!(family.len(), 6);
        assert_eq!(family[0], Normalization::Normal);
        assert_eq!(family[1], Normalization::AbnormalMeasure);
        assert_eq!(family[0].lambda0(), 1.0);
        assert_eq!(family[2].lambda0(), 0.0);
    }

    #[test]
    fn steering_down_is_a_normal_extremal_with_unit_adjoint() {
        let problem = steer_down_problem(4);
        let process = steer_process(4, -1.0);
        let table = crate::model::compile(&problem, &process, 1e-9).unwrap();
        let settings = CertifySettings::default();
        let certificate = certify_extremal(&table, &settings).unwrap();
        let ms = match &certificate.verdict {
            Verdict::NormalExtremal { multipliers } => multipliers,
            other => panic!("expected a normal extremal, got {other:?}"),
        };
        for pk in &ms.p {
            assert!((pk[0] + 1.0).abs() <= 1e-9, "adjoint {pk:?}");
        }
        assert!(ms.mu.iter().all(|&a| a == 0.0));
        for (qk, pk) in ms.q.iter().zip(&ms.p) {
            assert_eq!(qk, pk);
        }
        let report = certificate.weierstrass.as_ref().unwrap();
        assert!(report.passes(), "gaps {:?}", report.gaps);
        assert!(matches!(
            certificate.classical,
            ClassicalVerdict::Feasible { .. }
        ));
        assert!(check_multipliers_classical(&table, ms, &settings).unwrap());
        let sufficiency = sufficiency_from_table(&table, ms, &settings).unwrap();
        assert!(sufficiency.gap.abs() <= 1e-9);
    }

    #[test]
    fn steering_up_against_the_cost_is_refuted_in_every_mode() {
        let problem = steer_down_problem(4);
        let process = steer_process(4, 1.0);
        let table = crate::model::compile(&problem, &process, 1e-9).unwrap();
        let settings = CertifySettings::default();
        let certificate = certify_extremal(&table, &settings).unwrap();
        let refutations = match &certificate.verdict {
            Verdict::NotExtremal { refutations } => refutations,
            other => panic!("expected refutation, got {other:?}"),
        };
        assert_eq!(refutations.len(), 4);
        let family = Normalization::family(1);
        for (refuted, mode) in refutations.iter().zip(family) {
            assert_eq!(refuted.mode, mode);
            // Re-verify each certificate against a freshly built program.
            let built = build_multiplier_lp(&table, mode).unwrap();
            assert!(verify_farkas(&built.lp, &refuted.certificate, settings.lp_tol).unwrap());
        }
        // The classical conditions also refute this candidate, so there
        // is no multiplier set to audit.
        assert!(matches!(
            certificate.classical,
            ClassicalVerdict::Infeasible { .. }
        ));
        assert!(certificate.weierstrass.is_none());
    }

    #[test]
    fn homogeneous_cone_is_trivial_exactly_when_refuted() {
        let problem = steer_down_problem(3);
        let settings = LpSettings::default();

        // Refuted candidate: every probed direction of the homogeneous
        // cone caps at zero.
        let bad = steer_process(3, 1.0);
        let table = crate::model::compile(&problem, &bad, 1e-9).unwrap();
        let built = build_lp(&table, LpVariant::Homogeneous, false).unwrap();
        let directions: Vec<Vec<(usize, f64)>> = vec![
            vec![(built.layout.lambda0.unwrap(), -1.0)],
            vec![(built.layout.pp[0], -1.0), (built.layout.pm[0], 1.0)],
            vec![(built.layout.pp[0], 1.0), (built.layout.pm[0], -1.0)],
        ];
        for direction in &directions {
            let mut lp = built.lp.clone();
            lp.objective = vec![0.0; lp.n_vars()];
            for &(col, coeff) in direction {
                lp.objective[col] = coeff;
            }
            match solve_lp(&lp, &settings).unwrap() {
                LpOutcome::Optimal { value, .. } => {
                    assert!(value.abs() <= 1e-7, "cone ray found: {value}")
                }
                other => panic!("expected a capped cone, got {other:?}"),
            }
        }

        // Extremal candidate: the cost-multiplier direction is a genuine
        // ray, so the same probe is unbounded.
        let good = steer_process(3, -1.0);
        let table = crate::model::compile(&problem, &good, 1e-9).unwrap();
        let built = build_lp(&table, LpVariant::Homogeneous, false).unwrap();
        let mut lp = built.lp.clone();
        lp.objective = vec![0.0; lp.n_vars()];
        lp.objective[built.layout.lambda0.unwrap()] = -1.0;
        assert!(matches!(
            solve_lp(&lp, &settings).unwrap(),
            LpOutcome::Unbounded { .. }
        ));
    }

    #[test]
    fn riding_optimum_certifies_with_canonical_multipliers() {
        let n_steps = 16;
        let table = riding_table(n_steps);
        let settings = CertifySettings::default();
        let certificate = certify_extremal(&table, &settings).unwrap();
        let ms = match &certificate.verdict {
            Verdict::NormalExtremal { multipliers } => multipliers,
            other => panic!("expected a normal extremal, got {other:?}"),
        };
        let dt = table.grid.dt();
        // The minimal-norm adjoint starts at exactly -1 and climbs by dt
        // per interval; atoms live on the constrained arc only.
        assert!((ms.p[0][0] + 1.0).abs() <= 1e-6, "p(a) = {}", ms.p[0][0]);
        for k in 0..n_steps {
            let expected = ms.p[0][0] + k as f64 * dt;
            assert!(
                (ms.p[k][0] - expected).abs() <= 1e-6,
                "adjoint drifts at node {k}"
            );
        }
        for k in 0..n_steps / 2 {
            assert_eq!(ms.mu[k], 0.0, "atom off the active arc at {k}");
        }
        let mass: f64 = ms.mu.iter().sum();
        assert!((mass - (ms.p[0][0] + 2.0)).abs() <= 1e-6);
        // On the riding arc the measure-corrected adjoint vanishes.
        let qt = assemble_q_intervals(ms, &table).unwrap();
        for (k, qtk) in qt.iter().enumerate().skip(n_steps / 2) {
            assert!(qtk[0].abs() <= 1e-7, "qt at interval {k} = {}", qtk[0]);
        }
        assert!(certificate.weierstrass.as_ref().unwrap().passes());
        assert!(matches!(
            certificate.classical,
            ClassicalVerdict::Feasible { .. }
        ));
        assert!(check_multipliers_classical(&table, ms, &settings).unwrap());
        let sufficiency = sufficiency_from_table(&table, ms, &settings).unwrap();
        assert!(
            sufficiency.gap.abs() <= 1e-6,
            "cross-check gap {}",
            sufficiency.gap
        );
        assert!((sufficiency.direct_cost - (0.5 + 1.0 / n_steps as f64)).abs() <= 1e-9);
    }

    #[test]
    fn riding_abnormal_modes_are_all_refuted() {
        let table = riding_table(8);
        let settings = CertifySettings::default();
        for mode in &Normalization::family(1)[1..] {
            match find_multipliers(&table, *mode, &settings).unwrap() {
                FindOutcome::Infeasible(certificate) => {
                    let built = build_multiplier_lp(&table, *mode).unwrap();
                    assert!(verify_farkas(&built.lp, &certificate, settings.lp_tol).unwrap());
                }
                FindOutcome::Feasible(ms) => {
                    panic!("mode {} should fail, got {ms:?}", mode.label())
                }
            }
        }
    }

    #[test]
    fn corrupted_multipliers_fail_the_pinned_classical_check() {
        let table = riding_table(8);
        let settings = CertifySettings::default();
        let ms = match find_multipliers(&table, Normalization::Normal, &settings).unwrap() {
            FindOutcome::Feasible(ms) => ms,
            other => panic!("unexpected {other:?}"),
        };
        assert!(check_multipliers_classical(&table, &ms, &settings).unwrap());
        let mut corrupted = ms;
        corrupted.p[3][0] += 0.5;
        assert!(!check_multipliers_classical(&table, &corrupted, &settings).unwrap());
    }

    #[test]
    fn hand_weierstrass_gaps_follow_the_sample_maximum() {
        // Two intervals, f = u, no running cost, constraint inactive:
        // with q = c > 0 the candidate u* = 1 attains the maximum, while
        // u* = 0 leaves a gap of exactly c.
        let c = 0.75;
        let hand_table = |candidate_f: f64| {
            let samples = vec![
                (vec![candidate_f], 0.0),
                (vec![1.0], 0.0),
                (vec![-1.0], 0.0),
            ];
            ExtremalDataTable {
                n: 1,
                m: 1,
                grid: Grid::new(0.0, 1.0, 2).unwrap(),
                fx: vec![vec![vec![0.0]]; 2],
                fu: vec![vec![vec![1.0]]; 2],
                lsub: vec![vec![(vec![0.0], vec![0.0])]; 2],
                ncone: vec![vec![]; 2],
                wsamples: vec![samples.clone(), samples],
                h: vec![-1.0; 3],
                gamma: vec![vec![vec![0.0]]; 3],
                tol_active: vec![1e-6; 3],
                l_sub: vec![vec![0.0, 0.0]],
                e_ncone: vec![],
                origin: TableOrigin::HandCoded {
                    label: "weierstrass-gap".to_string(),
                },
            }
        };
        let ms = MultiplierSet {
            p: vec![vec![c]; 3],
            lambda0: 0.0,
            mu: vec![0.0; 3],
            gamma: vec![None, None, None],
            q: Vec::new(),
        };
        let at_max = check_weierstrass(&hand_table(1.0), &ms, 1e-7).unwrap();
        assert_eq!(at_max.gaps, vec![0.0, 0.0]);
        assert!(at_max.passes());
        let off_max = check_weierstrass(&hand_table(0.0), &ms, 1e-7).unwrap();
        assert!((off_max.gaps[0] - c).abs() <= 1e-12);
        assert_eq!(off_max.argmax, vec![1, 1]);
        assert!(!off_max.passes());
    }

    #[test]
    fn sufficiency_guards_mode_class_and_cross_check() {
        let table = riding_table(8);
        let settings = CertifySettings::default();
        let ms = match find_multipliers(&table, Normalization::Normal, &settings).unwrap() {
            FindOutcome::Feasible(ms) => ms,
            other => panic!("unexpected {other:?}"),
        };
        // Abnormal multipliers are rejected outright.
        let mut abnormal = ms.clone();
        abnormal.lambda0 = 0.0;
        match sufficiency_from_table(&table, &abnormal, &settings) {
            Err(CertifyError::NotNormal { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        // Hand-coded provenance has no problem to re-solve.
        let mut hand = table.clone();
        hand.origin = TableOrigin::HandCoded {
            label: "relabeled".to_string(),
        };
        match sufficiency_from_table(&hand, &ms, &settings) {
            Err(CertifyError::NotLinearConvex { label }) => {
                assert_eq!(label, "relabeled")
            }
            other => panic!("unexpected {other:?}"),
        }
        // A candidate that is not the discrete optimum fails the
        // cross-check rather than receiving a certificate.
        let problem = riding_problem(8);
        let suboptimal = Process {
            x: vec![vec![1.0]; 9],
            u: vec![vec![0.0]; 8],
        };
        match sufficiency_certificate(&problem, &suboptimal, &ms, &settings) {
            Err(CertifyError::CrossCheckFailed { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn certificates_are_identical_across_worker_counts() {
        let problem = steer_down_problem(4);
        let process = steer_process(4, 1.0);
        let table = crate::model::compile(&problem, &process, 1e-9).unwrap();
        let sequential = CertifySettings {
            threads: 1,
            ..CertifySettings::default()
        };
        let parallel = CertifySettings {
            threads: 4,
            ..sequential
        };
        let a = certify_extremal(&table, &sequential).unwrap();
        let b = certify_extremal(&table, &parallel).unwrap();
        let render = crate::report::to_json_pretty;
        assert_eq!(render(&a), render(&b));
    }
}
