//! Built-in end-to-end checks tying every layer together.
//!
//! Each check states a property whose expected outcome is derived
//! independently of the code path it exercises — hand-computed adjoint
//! recursions, closed-form costs, a brute-force vertex-enumeration oracle,
//! or a second solver on the same data. A release is healthy exactly when
//! [`run_all`] reports eight passes; the same checks back the `selftest`
//! command and the acceptance test target.
//!
//! The eight properties:
//!
//! 1. the Example (L) rest point is refuted in every normalization mode on
//!    grids from 16 through 200 intervals, each refusal carrying a Farkas
//!    certificate that re-verifies against a freshly rebuilt program, in
//!    under ten seconds;
//! 2. the same rest point satisfies the classical conditions with unit
//!    cost multiplier and an essentially zero adjoint — the contrast that
//!    motivates the sharper system;
//! 3. the descent family `x = -4 alpha t`, `u1 = -alpha` prices out to
//!    `-3 alpha / 4` under grid refinement;
//! 4. the constraint-riding instance round-trips: the direct optimum
//!    approaches cost `1/2`, certifies as a normal extremal whose measure
//!    lives only on the riding arc, and earns a cross-checked global
//!    minimality certificate;
//! 5. every multiplier set the engine returns survives the
//!    pointwise-maximization audit recomputed outside any linear program;
//! 6. the simplex core agrees with basic-solution enumeration on a
//!    thousand random programs and produces verified infeasibility
//!    certificates on two hundred more;
//! 7. hinge penalization of the riding instance yields nondecreasing
//!    relaxed costs bounded by the constrained optimum, closing the gap
//!    under the default weight schedule;
//! 8. whenever the sharpened system finds multipliers on a random
//!    linear-convex instance, the classical system accepts the very same
//!    multipliers.

use std::fmt::Write as _;
use std::time::Instant;

use crate::certify::{
    build_multiplier_lp, certify_extremal, check_classical, check_multipliers_classical,
    check_weierstrass, find_multipliers, sufficiency_certificate, CertifySettings,
    ClassicalVerdict, FindOutcome, MultiplierSet, Normalization, Verdict,
};
use crate::direct::{solve_direct, DirectOutcome};
use crate::example_l::{example_l_table, face_problem, improving_family};
use crate::linprog::{solve_lp, verify_farkas, LpOutcome, LpSettings};
use crate::model::{compile, eval_cost, ExtremalDataTable};
use crate::penalab::{run_schedule, PenaltySchedule};
use crate::testbed::{
    enumerate_lp, random_box_lp, random_infeasible_lp, random_lc_instance, riding_problem,
    OracleVerdict,
};

/// Result of one built-in check.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    /// 1-based position in the fixed check list.
    pub index: usize,
    pub name: &'static str,
    pub passed: bool,
    /// One line of measured evidence (or the failure reason).
    pub details: String,
}

type Check = fn() -> Result<String, String>;

const CHECKS: [(&str, Check); 8] = [
    ("example-l-refuted-with-certificates", refutation_family),
    ("example-l-classical-contrast", classical_contrast),
    ("descent-family-cost", descent_family_cost),
    ("riding-sufficiency-round-trip", riding_round_trip),
    ("returned-multipliers-pass-maximization", maximization_audit),
    ("lp-core-matches-enumeration", lp_core_oracle),
    ("penalty-schedule-convergence", penalty_convergence),
    ("found-multipliers-satisfy-classical", implication_property),
];

/// Runs every check in order.
pub fn run_all() -> Vec<CriterionOutcome> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, &(name, check))| {
            let (passed, details) = match check() {
                Ok(details) => (true, details),
                Err(details) => (false, details),
            };
            CriterionOutcome {
                index: i + 1,
                name,
                passed,
                details,
            }
        })
        .collect()
}

/// Runs a single check by its 1-based index.
pub fn run_one(index: usize) -> Option<CriterionOutcome> {
    let &(name, check) = CHECKS.get(index.checked_sub(1)?)?;
    let (passed, details) = match check() {
        Ok(details) => (true, details),
        Err(details) => (false, details),
    };
    Some(CriterionOutcome {
        index,
        name,
        passed,
        details,
    })
}

fn settings() -> CertifySettings {
    CertifySettings::default()
}

/// Check 1: the Example (L) rest point must be refuted on every grid from
/// 16 intervals up, with each normalization mode's Farkas certificate
/// re-verified against a program rebuilt from scratch, within ten seconds
/// overall.
fn refutation_family() -> Result<String, String> {
    let start = Instant::now();
    let cs = settings();
    let expected_modes = Normalization::family(1).len();
    let mut certified_modes = 0usize;
    for n_steps in [16usize, 64, 200] {
        let table = example_l_table(n_steps);
        let cert = certify_extremal(&table, &cs)
            .map_err(|e| format!("N={n_steps}: certification error: {e}"))?;
        let refutations = match cert.verdict {
            Verdict::NotExtremal { refutations } => refutations,
            other => {
                return Err(format!(
                    "N={n_steps}: expected a refutation, got {}",
                    verdict_name(&other)
                ))
            }
        };
        if refutations.len() != expected_modes {
            return Err(format!(
                "N={n_steps}: {} modes refuted, expected {expected_modes}",
                refutations.len()
            ));
        }
        for refuted in &refutations {
            let rebuilt = build_multiplier_lp(&table, refuted.mode)
                .map_err(|e| format!("N={n_steps}: rebuild failed: {e}"))?;
            let ok = verify_farkas(&rebuilt.lp, &refuted.certificate, cs.lp_tol)
                .map_err(|e| format!("N={n_steps}: verification error: {e}"))?;
            if !ok {
                return Err(format!(
                    "N={n_steps}: certificate for mode {} does not verify \
                     against the rebuilt program",
                    refuted.mode.label()
                ));
            }
            certified_modes += 1;
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() >= 10.0 {
        return Err(format!(
            "refutations verified but took {:.2}s (budget 10s)",
            elapsed.as_secs_f64()
        ));
    }
    Ok(format!(
        "grids {{16, 64, 200}} refuted in all {expected_modes} modes; \
         {certified_modes} certificates re-verified; {:.2}s",
        elapsed.as_secs_f64()
    ))
}

/// Check 2: the classical conditions accept the Example (L) rest point
/// with unit cost multiplier and `max_k |p_k| <= 1e-7`.
fn classical_contrast() -> Result<String, String> {
    let table = example_l_table(200);
    let verdict =
        check_classical(&table, &settings()).map_err(|e| format!("classical check error: {e}"))?;
    let (mode, ms) = match verdict {
        ClassicalVerdict::Feasible { mode, multipliers } => (mode, multipliers),
        ClassicalVerdict::Infeasible { .. } => {
            return Err("classical conditions unexpectedly infeasible".to_string())
        }
    };
    if ms.lambda0 != 1.0 {
        return Err(format!(
            "classical multipliers found in mode {} with lambda0 = {}, \
             expected the normal mode",
            mode.label(),
            ms.lambda0
        ));
    }
    let p_max =
        ms.p.iter()
            .flatten()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if p_max > 1e-7 {
        return Err(format!(
            "classical adjoint should vanish, found max |p_k| = {p_max:e}"
        ));
    }
    Ok(format!(
        "feasible with lambda0 = 1 and max |p_k| = {p_max:.2e} on 200 \
         intervals"
    ))
}

/// Check 3: the descent family at `alpha = 0.2` costs `-0.15` within
/// `0.01` on 200 intervals and within `0.002` on 1000.
fn descent_family_cost() -> Result<String, String> {
    let mut detail = String::new();
    for (n_steps, tol) in [(200usize, 0.01), (1000, 0.002)] {
        let problem = face_problem(n_steps);
        let process = improving_family(n_steps, 0.2);
        let cost = eval_cost(&problem, &process)
            .map_err(|e| format!("N={n_steps}: cost evaluation: {e}"))?;
        let miss = (cost + 0.15).abs();
        if miss > tol {
            return Err(format!(
                "N={n_steps}: cost {cost:.6} misses -0.15 by {miss:.4} \
                 (tolerance {tol})"
            ));
        }
        let _ = write!(detail, "N={n_steps}: {cost:.6} (miss {miss:.1e}); ");
    }
    Ok(format!("{detail}target -0.15"))
}

/// Check 4: on the riding instance for N in {16, 32, 64, 128, 256}, the
/// direct optimum lands within `5/N` of the limit cost `1/2`, certifies
/// as a normal extremal whose atoms vanish off the riding arc, and earns
/// a cross-checked global-minimum certificate with gap at most `1e-6`.
fn riding_round_trip() -> Result<String, String> {
    let cs = settings();
    let lp = LpSettings::default();
    let mut worst_cost_miss = 0.0f64;
    let mut worst_gap = 0.0f64;
    for n_steps in [16usize, 32, 64, 128, 256] {
        let problem = riding_problem(n_steps);
        let (process, cost) = match solve_direct(&problem, &lp)
            .map_err(|e| format!("N={n_steps}: direct solve: {e}"))?
        {
            DirectOutcome::Optimal { process, cost, .. } => (process, cost),
            other => {
                return Err(format!(
                    "N={n_steps}: direct solver returned {}",
                    direct_name(&other)
                ))
            }
        };
        let miss = (cost - 0.5).abs();
        if miss > 5.0 / n_steps as f64 {
            return Err(format!(
                "N={n_steps}: direct cost {cost} is {miss:.4} from 1/2, \
                 beyond 5/N"
            ));
        }
        worst_cost_miss = worst_cost_miss.max(miss);
        let table = compile(&problem, &process, 1e-7)
            .map_err(|e| format!("N={n_steps}: table compilation: {e}"))?;
        let cert = certify_extremal(&table, &cs)
            .map_err(|e| format!("N={n_steps}: certification: {e}"))?;
        let ms = match cert.verdict {
            Verdict::NormalExtremal { multipliers } => multipliers,
            other => {
                return Err(format!(
                    "N={n_steps}: expected a normal extremal, got {}",
                    verdict_name(&other)
                ))
            }
        };
        for (k, &atom) in ms.mu.iter().enumerate() {
            let off_arc = table.h[k] < -table.tol_active[k];
            if off_arc && atom != 0.0 {
                return Err(format!(
                    "N={n_steps}: atom {atom:e} at node {k} (t = {:.3}) \
                     off the riding arc",
                    table.grid.node(k)
                ));
            }
        }
        let sufficiency = sufficiency_certificate(&problem, &process, &ms, &cs)
            .map_err(|e| format!("N={n_steps}: sufficiency: {e}"))?;
        if sufficiency.gap.abs() > 1e-6 {
            return Err(format!(
                "N={n_steps}: sufficiency gap {:e} exceeds 1e-6",
                sufficiency.gap
            ));
        }
        worst_gap = worst_gap.max(sufficiency.gap.abs());
    }
    Ok(format!(
        "N in {{16..256}}: worst cost miss {worst_cost_miss:.4} (left sums \
         carry +1/N), atoms confined to the arc, worst sufficiency gap \
         {worst_gap:.1e}"
    ))
}

/// Check 5: every multiplier set produced across the reference instances
/// passes the recomputed maximization audit with gap at most `1e-7`.
fn maximization_audit() -> Result<String, String> {
    let cs = settings();
    let lp = LpSettings::default();
    let mut harvest: Vec<(String, ExtremalDataTable, MultiplierSet)> = Vec::new();

    for n_steps in [16usize, 64] {
        let problem = riding_problem(n_steps);
        let process =
            match solve_direct(&problem, &lp).map_err(|e| format!("riding N={n_steps}: {e}"))? {
                DirectOutcome::Optimal { process, .. } => process,
                other => {
                    return Err(format!(
                        "riding N={n_steps}: direct solver returned {}",
                        direct_name(&other)
                    ))
                }
            };
        let table =
            compile(&problem, &process, 1e-7).map_err(|e| format!("riding N={n_steps}: {e}"))?;
        match find_multipliers(&table, Normalization::Normal, &cs)
            .map_err(|e| format!("riding N={n_steps}: {e}"))?
        {
            FindOutcome::Feasible(ms) => harvest.push((format!("riding N={n_steps}"), table, ms)),
            FindOutcome::Infeasible(_) => {
                return Err(format!(
                    "riding N={n_steps}: normal mode unexpectedly \
                     infeasible"
                ))
            }
        }
    }

    for n_steps in [64usize, 200] {
        let table = example_l_table(n_steps);
        match check_classical(&table, &cs).map_err(|e| format!("classical N={n_steps}: {e}"))? {
            ClassicalVerdict::Feasible { multipliers, .. } => harvest.push((
                format!("example-l classical N={n_steps}"),
                table,
                multipliers,
            )),
            ClassicalVerdict::Infeasible { .. } => {
                return Err(format!(
                    "example-l classical N={n_steps}: unexpectedly \
                     infeasible"
                ))
            }
        }
    }

    let mut random_found = 0usize;
    for seed in 0..40u64 {
        let problem = random_lc_instance(seed);
        let process = match solve_direct(&problem, &lp).map_err(|e| format!("seed {seed}: {e}"))? {
            DirectOutcome::Optimal { process, .. } => process,
            other => {
                return Err(format!(
                    "seed {seed}: direct solver returned {}",
                    direct_name(&other)
                ))
            }
        };
        let table = compile(&problem, &process, 1e-7).map_err(|e| format!("seed {seed}: {e}"))?;
        let cert = certify_extremal(&table, &cs).map_err(|e| format!("seed {seed}: {e}"))?;
        let ms = match cert.verdict {
            Verdict::NormalExtremal { multipliers } => multipliers,
            Verdict::AbnormalExtremal { multipliers, .. } => multipliers,
            Verdict::NotExtremal { .. } => continue,
        };
        random_found += 1;
        harvest.push((format!("random seed {seed}"), table, ms));
    }
    if random_found < 10 {
        return Err(format!(
            "only {random_found} random instances yielded multipliers; \
             the sweep is too thin to be meaningful"
        ));
    }

    let mut worst = 0.0f64;
    for (label, table, ms) in &harvest {
        let report =
            check_weierstrass(table, ms, 1e-7).map_err(|e| format!("{label}: audit error: {e}"))?;
        if !report.passes() {
            return Err(format!(
                "{label}: maximization gap {:e} at interval {} exceeds \
                 1e-7",
                report.max_gap(),
                report
                    .gaps
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, _)| k)
                    .unwrap_or(0)
            ));
        }
        worst = worst.max(report.max_gap());
    }
    Ok(format!(
        "{} multiplier sets audited ({random_found} from random \
         instances); worst recomputed gap {worst:.1e}",
        harvest.len()
    ))
}

/// Check 6: on a thousand random box programs the simplex optimum matches
/// brute-force vertex enumeration within `1e-8`, and two hundred
/// constructed-infeasible programs all yield verified certificates.
fn lp_core_oracle() -> Result<String, String> {
    let lp_settings = LpSettings::default();
    let mut optima = 0usize;
    let mut infeasible = 0usize;
    for seed in 0..1000u64 {
        let lp = random_box_lp(seed);
        let oracle = enumerate_lp(&lp, 1e-7).map_err(|e| format!("seed {seed}: oracle: {e}"))?;
        let solved =
            solve_lp(&lp, &lp_settings).map_err(|e| format!("seed {seed}: solver: {e}"))?;
        match (oracle, solved) {
            (OracleVerdict::Optimal { value }, LpOutcome::Optimal { value: solver, .. }) => {
                let miss = (value - solver).abs();
                if miss > 1e-8 * (1.0 + value.abs()) {
                    return Err(format!(
                        "seed {seed}: oracle {value}, solver {solver} \
                         (miss {miss:e})"
                    ));
                }
                optima += 1;
            }
            (OracleVerdict::Infeasible, LpOutcome::Infeasible { certificate }) => {
                if !verify_farkas(&lp, &certificate, 1e-9)
                    .map_err(|e| format!("seed {seed}: verify: {e}"))?
                {
                    return Err(format!(
                        "seed {seed}: infeasibility certificate does not \
                         verify"
                    ));
                }
                infeasible += 1;
            }
            (oracle, solved) => {
                return Err(format!(
                    "seed {seed}: oracle and solver disagree on the \
                     class: {oracle:?} vs {}",
                    lp_name(&solved)
                ))
            }
        }
    }
    let mut constructed = 0usize;
    for seed in 0..200u64 {
        let lp = random_infeasible_lp(seed);
        match solve_lp(&lp, &lp_settings).map_err(|e| format!("constructed seed {seed}: {e}"))? {
            LpOutcome::Infeasible { certificate } => {
                if !verify_farkas(&lp, &certificate, 1e-9)
                    .map_err(|e| format!("constructed seed {seed}: {e}"))?
                {
                    return Err(format!(
                        "constructed seed {seed}: certificate does not \
                         verify"
                    ));
                }
                constructed += 1;
            }
            other => {
                return Err(format!(
                    "constructed seed {seed}: expected infeasible, got {}",
                    lp_name(&other)
                ))
            }
        }
    }
    Ok(format!(
        "1000 programs matched the enumeration oracle ({optima} optima, \
         {infeasible} infeasible); {constructed} constructed-infeasible \
         certificates verified"
    ))
}

/// Check 7: the default hinge-weight schedule on the riding instance
/// produces nondecreasing relaxed costs bounded by the constrained
/// optimum plus `1e-9`, with final gap at most `1e-3`.
fn penalty_convergence() -> Result<String, String> {
    let problem = riding_problem(16);
    let report = run_schedule(
        &problem,
        &PenaltySchedule::default_powers(),
        &LpSettings::default(),
    )
    .map_err(|e| format!("schedule run: {e}"))?;
    if !report.monotone {
        return Err("relaxed costs are not nondecreasing along the schedule".to_string());
    }
    if !report.bounded {
        return Err(format!(
            "a relaxed cost exceeds the constrained optimum \
             {:.9} by more than 1e-9",
            report.constrained_cost
        ));
    }
    let final_gap = report.final_gap();
    if final_gap > 1e-3 {
        return Err(format!("final penalization gap {final_gap:e} exceeds 1e-3"));
    }
    let weights: Vec<String> = report
        .steps
        .iter()
        .map(|s| format!("{:.0}", s.weight))
        .collect();
    Ok(format!(
        "weights {{{}}}: nondecreasing, bounded by the constrained cost \
         {:.6}, final gap {final_gap:.1e}",
        weights.join(", "),
        report.constrained_cost
    ))
}

/// Check 8: on fifty random linear-convex instances where the sharpened
/// system finds multipliers at the direct optimum, the classical system
/// pinned to those same multipliers is feasible every time.
fn implication_property() -> Result<String, String> {
    let cs = settings();
    let lp = LpSettings::default();
    let mut found = 0usize;
    let mut attempts = 0usize;
    for seed in 0..200u64 {
        if found == 50 {
            break;
        }
        attempts += 1;
        let problem = random_lc_instance(seed);
        let process = match solve_direct(&problem, &lp)
            .map_err(|e| format!("seed {seed}: direct solve: {e}"))?
        {
            DirectOutcome::Optimal { process, .. } => process,
            other => {
                return Err(format!(
                    "seed {seed}: direct solver returned {}",
                    direct_name(&other)
                ))
            }
        };
        let table = compile(&problem, &process, 1e-7)
            .map_err(|e| format!("seed {seed}: table compilation: {e}"))?;
        let mut found_here = None;
        for mode in Normalization::family(table.n) {
            match find_multipliers(&table, mode, &cs)
                .map_err(|e| format!("seed {seed}: search: {e}"))?
            {
                FindOutcome::Feasible(ms) => {
                    found_here = Some((mode, ms));
                    break;
                }
                FindOutcome::Infeasible(_) => {}
            }
        }
        let Some((mode, ms)) = found_here else {
            continue;
        };
        let accepted = check_multipliers_classical(&table, &ms, &cs)
            .map_err(|e| format!("seed {seed}: classical check: {e}"))?;
        if !accepted {
            return Err(format!(
                "seed {seed}: multipliers found in mode {} rejected by \
                 the classical conditions",
                mode.label()
            ));
        }
        found += 1;
    }
    if found < 50 {
        return Err(format!(
            "only {found} of the required 50 instances yielded \
             multipliers across {attempts} attempts"
        ));
    }
    Ok(format!(
        "50 multiplier sets found across {attempts} random instances; \
         every one accepted by the classical conditions"
    ))
}

fn verdict_name(verdict: &Verdict) -> &'static str {
    match verdict {
        Verdict::NormalExtremal { .. } => "NormalExtremal",
        Verdict::AbnormalExtremal { .. } => "AbnormalExtremal",
        Verdict::NotExtremal { .. } => "NotExtremal",
    }
}

fn direct_name(outcome: &DirectOutcome) -> &'static str {
    match outcome {
        DirectOutcome::Optimal { .. } => "Optimal",
        DirectOutcome::Infeasible { .. } => "Infeasible",
        DirectOutcome::Unbounded { .. } => "Unbounded",
    }
}

fn lp_name(outcome: &LpOutcome) -> &'static str {
    match outcome {
        LpOutcome::Optimal { .. } => "Optimal",
        LpOutcome::Infeasible { .. } => "Infeasible",
        LpOutcome::Unbounded { .. } => "Unbounded",
    }
}
