//! Penalization laboratory: hinge-penalty relaxations of the state
//! constraint and their convergence to the constrained optimum.
//!
//! For a weight `i > 0`, [`penalize`] removes the constraint
//! `h_k(x) = d_k·x + e_k <= 0` and charges `i·max(0, h_k(x))` through the
//! running cost instead — a two-piece max-affine term per interval, so the
//! relaxed problem stays in the same linear-convex class and the same
//! direct transcription solves it. Because the left-endpoint quadrature
//! prices intervals, the final node's violation is free in the relaxed
//! problem; only the cost gap is asserted on, never the terminal state.
//!
//! [`run_schedule`] solves the relaxed sequence over increasing weights
//! and reports the value trajectory. Three facts are checked for every
//! report: the infima are nondecreasing in the weight, they never exceed
//! the constrained optimum (relaxation bound), and the gap shrinks along
//! the schedule. The duals of the binding hinge rows, scaled by the
//! weight, are tabulated per node next to the measure atoms the certifier
//! assigns at the constrained optimum: as the weight grows, the hinge
//! prices converge to the constraint measure.

use serde::Serialize;
use std::fmt;

use crate::certify::{find_multipliers, CertifyError, CertifySettings, FindOutcome, Normalization};
use crate::direct::{solve_direct, transcribe, DirectError, DirectOutcome, RowKind};
use crate::linprog::LpSettings;
use crate::model::{AffinePiece, LcProblem, MaxAffine, ModelError, PerNode};

/// Errors from the penalization laboratory.
#[derive(Debug)]
pub enum PenalabError {
    Model(ModelError),
    Direct(DirectError),
    Certify(CertifyError),
    /// Invalid weight schedule.
    Schedule(String),
    /// A solve along the schedule failed; the steps completed before the
    /// failure are preserved.
    Aborted {
        steps: Vec<PenaltyStep>,
        reason: String,
    },
}

impl fmt::Display for PenalabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenalabError::Model(e) => write!(f, "{e}"),
            PenalabError::Direct(e) => write!(f, "{e}"),
            PenalabError::Certify(e) => write!(f, "{e}"),
            PenalabError::Schedule(msg) => {
                write!(f, "invalid penalty schedule: {msg}")
            }
            PenalabError::Aborted { steps, reason } => write!(
                f,
                "schedule aborted after {} completed solves: {reason}",
                steps.len()
            ),
        }
    }
}

impl std::error::Error for PenalabError {}

impl From<ModelError> for PenalabError {
    fn from(e: ModelError) -> Self {
        PenalabError::Model(e)
    }
}

impl From<DirectError> for PenalabError {
    fn from(e: DirectError) -> Self {
        PenalabError::Direct(e)
    }
}

impl From<CertifyError> for PenalabError {
    fn from(e: CertifyError) -> Self {
        PenalabError::Certify(e)
    }
}

/// A finite, strictly increasing sequence of positive penalty weights.
#[derive(Debug, Clone, Serialize)]
pub struct PenaltySchedule {
    pub weights: Vec<f64>,
}

impl PenaltySchedule {
    pub fn new(weights: Vec<f64>) -> Result<PenaltySchedule, PenalabError> {
        if weights.is_empty() {
            return Err(PenalabError::Schedule(
                "schedule must contain at least one weight".to_string(),
            ));
        }
        for &w in &weights {
            if !w.is_finite() || w <= 0.0 {
                return Err(PenalabError::Schedule(format!(
                    "weights must be positive and finite, got {w}"
                )));
            }
        }
        for pair in weights.windows(2) {
            if pair[1] <= pair[0] {
                return Err(PenalabError::Schedule(format!(
                    "weights must be strictly increasing, got {} after {}",
                    pair[1], pair[0]
                )));
            }
        }
        Ok(PenaltySchedule { weights })
    }

    /// Six powers of four starting at 1: `{1, 4, 16, 64, 256, 1024}`.
    pub fn default_powers() -> PenaltySchedule {
        PenaltySchedule {
            weights: vec![1.0, 4.0, 16.0, 64.0, 256.0, 1024.0],
        }
    }
}

/// Removes the state constraint and charges `weight·max(0, d_k·x + e_k)`
/// through the running cost on every interval.
///
/// The hinge enters as a two-piece max-affine term (zero piece first,
/// priced piece second), so the result is again a valid linear-convex
/// problem with an identically inactive constraint `h = -1`.
pub fn penalize(problem: &LcProblem, weight: f64) -> LcProblem {
    assert!(
        weight > 0.0 && weight.is_finite(),
        "penalty weight must be positive and finite, got {weight}"
    );
    let (n, m) = (problem.n, problem.m);
    let hinge_at = |k: usize| -> MaxAffine {
        let d = problem.constraint_d.get(k);
        let e = *problem.constraint_e.get(k);
        let mut gradient = vec![0.0; n + m];
        for (g, &v) in gradient.iter_mut().zip(d) {
            *g = weight * v;
        }
        MaxAffine {
            pieces: vec![
                AffinePiece {
                    gradient: vec![0.0; n + m],
                    offset: 0.0,
                },
                AffinePiece {
                    gradient,
                    offset: weight * e,
                },
            ],
        }
    };
    let node_invariant = matches!(problem.running_cost, PerNode::Constant(_))
        && matches!(problem.constraint_d, PerNode::Constant(_))
        && matches!(problem.constraint_e, PerNode::Constant(_));
    let running_cost = if node_invariant {
        let mut sum = problem.running_cost.get(0).clone();
        sum.terms.push(hinge_at(0));
        PerNode::Constant(sum)
    } else {
        PerNode::Each(
            (0..problem.grid.n_steps)
                .map(|k| {
                    let mut sum = problem.running_cost.get(k).clone();
                    sum.terms.push(hinge_at(k));
                    sum
                })
                .collect(),
        )
    };
    LcProblem::new(
        problem.grid,
        problem.a_mat.clone(),
        problem.b_mat.clone(),
        PerNode::Constant(vec![0.0; n]),
        PerNode::Constant(-1.0),
        running_cost,
        problem.endpoint_cost.clone(),
        problem.control_set.clone(),
        problem.endpoint_set.clone(),
        problem.weierstrass_samples.clone(),
    )
}

/// One solved schedule entry.
#[derive(Debug, Clone, Serialize)]
pub struct PenaltyStep {
    pub weight: f64,
    /// Optimum of the relaxed problem at this weight.
    pub cost: f64,
    /// Constrained optimum minus `cost`; nonnegative up to solver
    /// tolerance.
    pub gap: f64,
    /// Largest hinge value `max(0, h_k)` over the priced nodes of the
    /// relaxed optimum.
    pub max_hinge: f64,
    /// Per-node price of the binding hinge piece: `weight` times the
    /// magnitude of the piece's epigraph-row dual.
    pub dual_proxy: Vec<f64>,
    /// Total mass of `dual_proxy`.
    pub dual_mass: f64,
}

/// The full convergence report for one schedule.
#[derive(Debug, Clone, Serialize)]
pub struct PenaltyReport {
    /// Direct optimum of the constrained problem.
    pub constrained_cost: f64,
    pub steps: Vec<PenaltyStep>,
    /// Relaxed optima are nondecreasing in the weight (slack `1e-9`).
    pub monotone: bool,
    /// No relaxed optimum exceeds the constrained one (slack `1e-9`).
    pub bounded: bool,
    /// The gap shrinks along the schedule (slack `1e-9`).
    pub gap_decreasing: bool,
    /// Measure atoms the certifier assigns at the constrained optimum,
    /// for side-by-side comparison with the final `dual_proxy`; absent
    /// when no normalization mode admits multipliers there.
    pub mu_atoms: Option<Vec<f64>>,
}

impl PenaltyReport {
    /// Gap magnitude at the largest weight.
    pub fn final_gap(&self) -> f64 {
        self.steps.last().map_or(f64::INFINITY, |s| s.gap.abs())
    }
}

/// Solves the relaxed sequence over a weight schedule.
///
/// The constrained problem is solved first as the reference value and its
/// optimum handed to the certifier for the measure-atom column; each
/// schedule entry then gets an independent direct solve of the penalized
/// problem. A failed solve aborts with the completed steps preserved in
/// the error.
pub fn run_schedule(
    problem: &LcProblem,
    schedule: &PenaltySchedule,
    settings: &LpSettings,
) -> Result<PenaltyReport, PenalabError> {
    problem.validate(1e-7)?;
    if schedule.weights.is_empty() {
        return Err(PenalabError::Schedule(
            "schedule must contain at least one weight".to_string(),
        ));
    }
    let (constrained_cost, constrained_optimum) = match solve_direct(problem, settings) {
        Ok(DirectOutcome::Optimal { cost, process, .. }) => (cost, process),
        Ok(other) => {
            return Err(PenalabError::Aborted {
                steps: Vec::new(),
                reason: format!(
                    "constrained reference solve did not reach an \
                         optimum: {}",
                    outcome_name(&other)
                ),
            })
        }
        Err(e) => {
            return Err(PenalabError::Aborted {
                steps: Vec::new(),
                reason: format!("constrained reference solve: {e}"),
            })
        }
    };

    let mut steps: Vec<PenaltyStep> = Vec::new();
    for &weight in &schedule.weights {
        let penalized = penalize(problem, weight);
        let transcription = match transcribe(&penalized) {
            Ok(t) => t,
            Err(e) => {
                return Err(PenalabError::Aborted {
                    steps,
                    reason: format!("weight {weight}: {e}"),
                })
            }
        };
        let (process, cost, duals) = match solve_direct(&penalized, settings) {
            Ok(DirectOutcome::Optimal {
                process,
                cost,
                duals,
            }) => (process, cost, duals),
            Ok(other) => {
                return Err(PenalabError::Aborted {
                    steps,
                    reason: format!(
                        "weight {weight}: relaxed problem is {}",
                        outcome_name(&other)
                    ),
                })
            }
            Err(e) => {
                return Err(PenalabError::Aborted {
                    steps,
                    reason: format!("weight {weight}: {e}"),
                })
            }
        };
        let n_steps = problem.grid.n_steps;
        let max_hinge = (0..n_steps)
            .map(|k| problem.h_value(k, &process.x[k]).max(0.0))
            .fold(0.0f64, f64::max);
        let mut dual_proxy = vec![0.0; n_steps];
        for (kind, &dual) in transcription.row_kinds.iter().zip(&duals) {
            if let RowKind::RunningEpigraph { k, term, piece } = *kind {
                let hinge_term = penalized.running_cost.get(k).terms.len() - 1;
                if term == hinge_term && piece == 1 {
                    dual_proxy[k] = weight * dual.abs();
                }
            }
        }
        let dual_mass = dual_proxy.iter().sum();
        steps.push(PenaltyStep {
            weight,
            cost,
            gap: constrained_cost - cost,
            max_hinge,
            dual_proxy,
            dual_mass,
        });
    }

    let monotone = steps
        .windows(2)
        .all(|pair| pair[1].cost >= pair[0].cost - 1e-9);
    let bounded = steps.iter().all(|s| s.cost <= constrained_cost + 1e-9);
    let gap_decreasing = steps
        .windows(2)
        .all(|pair| pair[1].gap <= pair[0].gap + 1e-9);

    let table = crate::model::compile(problem, &constrained_optimum, 1e-7)?;
    let certify_settings = CertifySettings {
        lp_tol: settings.tol,
        ..CertifySettings::default()
    };
    let mut mu_atoms = None;
    for mode in Normalization::family(problem.n) {
        match find_multipliers(&table, mode, &certify_settings)? {
            FindOutcome::Feasible(ms) => {
                mu_atoms = Some(ms.mu);
                break;
            }
            FindOutcome::Infeasible(_) => {}
        }
    }

    Ok(PenaltyReport {
        constrained_cost,
        steps,
        monotone,
        bounded,
        gap_decreasing,
        mu_atoms,
    })
}

fn outcome_name(outcome: &DirectOutcome) -> &'static str {
    match outcome {
        DirectOutcome::Optimal { .. } => "optimal",
        DirectOutcome::Infeasible { .. } => "infeasible",
        DirectOutcome::Unbounded { .. } => "unbounded",
    }
}

/// Renders a report as CSV
/// (`weight,penalized_cost,gap,max_hinge_activity,dual_mass`).
pub fn schedule_csv(report: &PenaltyReport) -> String {
    let mut out = String::from("weight,penalized_cost,gap,max_hinge_activity,dual_mass\n");
    for step in &report.steps {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            crate::report::format_float(step.weight),
            crate::report::format_float(step.cost),
            crate::report::format_float(step.gap),
            crate::report::format_float(step.max_hinge),
            crate::report::format_float(step.dual_mass),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{eval_cost, Grid, Polytope, Process, PwaSum};
    use crate::testbed::riding_problem;

    #[test]
    fn schedule_validation_rejects_bad_weight_lists() {
        assert!(PenaltySchedule::new(vec![1.0, 4.0, 16.0]).is_ok());
        assert!(matches!(
            PenaltySchedule::new(vec![]),
            Err(PenalabError::Schedule(_))
        ));
        assert!(matches!(
            PenaltySchedule::new(vec![1.0, 1.0]),
            Err(PenalabError::Schedule(_))
        ));
        assert!(matches!(
            PenaltySchedule::new(vec![4.0, 1.0]),
            Err(PenalabError::Schedule(_))
        ));
        assert!(matches!(
            PenaltySchedule::new(vec![-1.0, 2.0]),
            Err(PenalabError::Schedule(_))
        ));
        assert_eq!(PenaltySchedule::default_powers().weights.len(), 6);
    }

    #[test]
    fn hinge_is_free_inside_and_prices_violation_linearly() {
        let n_steps = 8;
        let problem = riding_problem(n_steps);
        for weight in [1.0, 16.0] {
            let penalized = penalize(&problem, weight);
            penalized.validate(1e-7).unwrap();
            // The constraint is gone from the relaxed problem.
            for k in 0..=n_steps {
                assert_eq!(penalized.h_value(k, &[0.0]), -1.0);
            }
            assert_eq!(
                penalized.running_cost.get(0).terms.len(),
                problem.running_cost.get(0).terms.len() + 1
            );

            // Strictly feasible process: identical cost.
            let interior = Process {
                x: vec![vec![1.0]; n_steps + 1],
                u: vec![vec![0.0]; n_steps],
            };
            let base = eval_cost(&problem, &interior).unwrap();
            let priced = eval_cost(&penalized, &interior).unwrap();
            assert!((priced - base).abs() <= 1e-12);

            // Violation of 0.5 held for one time unit (half the horizon)
            // costs exactly 0.5 * weight extra.
            let mut x = vec![vec![0.0]; n_steps + 1];
            for xk in x.iter_mut().take(n_steps / 2) {
                xk[0] = -0.5;
            }
            let violating = Process {
                x,
                u: vec![vec![0.0]; n_steps],
            };
            let base = eval_cost(&problem, &violating).unwrap();
            let priced = eval_cost(&penalized, &violating).unwrap();
            assert!(
                (priced - base - 0.5 * weight).abs() <= 1e-12,
                "weight {weight}: extra cost {}",
                priced - base
            );
        }
    }

    #[test]
    fn riding_schedule_converges_with_emergent_measure() {
        let problem = riding_problem(16);
        let schedule = PenaltySchedule::default_powers();
        let report = run_schedule(&problem, &schedule, &LpSettings::default()).unwrap();
        assert_eq!(report.steps.len(), 6);
        assert!(report.monotone);
        assert!(report.bounded);
        assert!(report.gap_decreasing);
        assert!(report.final_gap() <= 1e-3, "gap {}", report.final_gap());
        assert!((report.constrained_cost - (0.5 + 1.0 / 16.0)).abs() <= 1e-9);
        // The certifier's atoms at the constrained optimum carry total
        // mass p(a) + 2 with p(a) in [-1, -1 + dt].
        let mass: f64 = report.mu_atoms.as_ref().unwrap().iter().sum();
        assert!((mass - 1.0).abs() <= 2.0 / 16.0 + 1e-7, "atom mass {mass}");
        for step in &report.steps {
            assert!(step.dual_mass >= -1e-12);
            assert!(step.max_hinge <= 0.5);
        }
        let csv = schedule_csv(&report);
        assert!(csv.starts_with("weight,penalized_cost,gap,max_hinge_activity,dual_mass\n"));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn inactive_constraint_keeps_every_relaxation_at_the_optimum() {
        // No binding constraint: relaxation changes nothing at any weight.
        let mut problem = riding_problem(8);
        problem.constraint_d = PerNode::Constant(vec![0.0]);
        problem.constraint_e = PerNode::Constant(-1.0);
        let schedule = PenaltySchedule::new(vec![1.0, 4.0, 16.0]).unwrap();
        let report = run_schedule(&problem, &schedule, &LpSettings::default()).unwrap();
        for step in &report.steps {
            assert!(
                (step.cost - report.constrained_cost).abs() <= 1e-9,
                "weight {}: cost {} vs {}",
                step.weight,
                step.cost,
                report.constrained_cost
            );
            assert_eq!(step.max_hinge, 0.0);
        }
        assert!(report.monotone && report.bounded && report.gap_decreasing);
    }

    #[test]
    fn under_penalized_unbounded_solve_aborts_with_partial_report() {
        // Reward for large x, constraint x <= 0, free initial state:
        // dropping the constraint at weight 1/2 leaves the reward
        // unmatched and the relaxation unbounded.
        let n_steps = 4;
        let running = PwaSum {
            terms: vec![MaxAffine {
                pieces: vec![AffinePiece {
                    gradient: vec![-1.0, 0.0],
                    offset: 0.0,
                }],
            }],
        };
        let problem = LcProblem::new(
            Grid::new(0.0, 1.0, n_steps).unwrap(),
            PerNode::Constant(vec![vec![0.0]]),
            PerNode::Constant(vec![vec![1.0]]),
            PerNode::Constant(vec![1.0]),
            PerNode::Constant(0.0),
            PerNode::Constant(running),
            PwaSum::zero(),
            PerNode::Constant(Polytope::hyperbox(1, -1.0, 1.0)),
            Polytope {
                dim: 2,
                c: vec![],
                d: vec![],
            },
            PerNode::Constant(vec![vec![-1.0], vec![1.0]]),
        );
        let schedule = PenaltySchedule::new(vec![0.5, 2.0]).unwrap();
        match run_schedule(&problem, &schedule, &LpSettings::default()) {
            Err(PenalabError::Aborted { steps, reason }) => {
                assert!(steps.is_empty());
                assert!(reason.contains("unbounded"), "reason: {reason}");
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }
}
