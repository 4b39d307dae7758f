//! Independent direct solver: explicit-Euler transcription of a
//! linear-convex problem into one linear program.
//!
//! The decision vector stacks all node states, all interval controls, one
//! epigraph scalar per running-cost term and interval, and one per
//! endpoint-cost term. Piecewise-affine costs enter through epigraph rows
//! (`s >= piece` for every affine piece), so the LP optimum equals the true
//! discrete cost. The transcription shares nothing with the certifier
//! beyond the LP engine itself — it is the oracle certificates are
//! cross-checked against, so its only coupling to the certifier is the
//! problem definition.

use crate::linprog::{
    solve_lp, FarkasCertificate, LpError, LpOutcome, LpProblem, LpSettings, Relation,
};
use crate::model::{check_admissible, eval_cost, LcProblem, ModelError, Process};

/// What a transcription row encodes; parallel to the LP's row list, for
/// dual lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// Euler dynamics equality, interval `k`, state component `i`.
    Dynamics { k: usize, i: usize },
    /// State-constraint row `d_k·x_k <= -e_k` at node `k`.
    State { k: usize },
    /// Control-polytope row at interval `k`.
    Control { k: usize, row: usize },
    /// Endpoint-polytope row.
    Endpoint { row: usize },
    /// Running-cost epigraph row: piece of term at interval `k`.
    RunningEpigraph { k: usize, term: usize, piece: usize },
    /// Endpoint-cost epigraph row.
    EndpointEpigraph { term: usize, piece: usize },
}

/// A transcribed problem: the LP plus the maps back to process space.
#[derive(Debug, Clone)]
pub struct Transcription {
    pub lp: LpProblem,
    /// One entry per LP row.
    pub row_kinds: Vec<RowKind>,
    n: usize,
    m: usize,
    nsteps: usize,
    /// First column of the state block at node `k`.
    x_col: Vec<usize>,
    /// First column of the control block at interval `k`.
    u_col: Vec<usize>,
}

impl Transcription {
    /// Extracts the process from an LP solution vector.
    pub fn decode(&self, solution: &[f64]) -> Process {
        let x = (0..=self.nsteps)
            .map(|k| solution[self.x_col[k]..self.x_col[k] + self.n].to_vec())
            .collect();
        let u = (0..self.nsteps)
            .map(|k| solution[self.u_col[k]..self.u_col[k] + self.m].to_vec())
            .collect();
        Process { x, u }
    }
}

/// Errors from transcription and direct solving.
#[derive(Debug)]
pub enum DirectError {
    Model(ModelError),
    Lp(LpError),
    /// The decoded LP optimum failed an internal audit (admissibility or
    /// cost agreement) — an encoding bug, never silently accepted.
    Audit(String),
}

impl std::fmt::Display for DirectError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DirectError::Model(e) => write!(f, "{e}"),
            DirectError::Lp(e) => write!(f, "{e}"),
            DirectError::Audit(msg) => write!(f, "transcription audit failed: {msg}"),
        }
    }
}

impl std::error::Error for DirectError {}

impl From<ModelError> for DirectError {
    fn from(e: ModelError) -> Self {
        DirectError::Model(e)
    }
}

impl From<LpError> for DirectError {
    fn from(e: LpError) -> Self {
        DirectError::Lp(e)
    }
}

/// Result of a direct solve.
#[derive(Debug, Clone)]
pub enum DirectOutcome {
    Optimal {
        process: Process,
        cost: f64,
        /// LP row duals, parallel to the transcription's `row_kinds`.
        duals: Vec<f64>,
    },
    /// No admissible process exists on this grid; the certificate is
    /// verified before being returned.
    Infeasible { certificate: FarkasCertificate },
    /// The discrete cost decreases without bound along the returned
    /// process-space direction.
    Unbounded { ray: Vec<f64> },
}

/// Builds the Euler-transcription LP for a validated problem.
pub fn transcribe(problem: &LcProblem) -> Result<Transcription, ModelError> {
    problem.validate(1e-7)?;
    let nsteps = problem.grid.n_steps;
    let (n, m) = (problem.n, problem.m);
    let dt = problem.grid.dt();

    // Column layout: states, controls, running epigraph scalars (one per
    // term per interval), endpoint epigraph scalars (one per term).
    let mut ncols = 0usize;
    let x_col: Vec<usize> = (0..=nsteps)
        .map(|_| {
            let c = ncols;
            ncols += n;
            c
        })
        .collect();
    let u_col: Vec<usize> = (0..nsteps)
        .map(|_| {
            let c = ncols;
            ncols += m;
            c
        })
        .collect();
    let s_col: Vec<usize> = (0..nsteps)
        .map(|k| {
            let c = ncols;
            ncols += problem.running_cost.get(k).terms.len();
            c
        })
        .collect();
    let se_col = ncols;
    ncols += problem.endpoint_cost.terms.len();

    let mut objective = vec![0.0; ncols];
    for k in 0..nsteps {
        for t in 0..problem.running_cost.get(k).terms.len() {
            objective[s_col[k] + t] = dt;
        }
    }
    for t in 0..problem.endpoint_cost.terms.len() {
        objective[se_col + t] = 1.0;
    }
    let mut lp = LpProblem::minimize(objective);
    let mut row_kinds = Vec::new();

    // Euler dynamics: x_{k+1} - x_k - dt (A x_k + B u_k) = 0.
    for k in 0..nsteps {
        let a = problem.a_mat.get(k);
        let b = problem.b_mat.get(k);
        for i in 0..n {
            let mut coeffs = vec![0.0; ncols];
            coeffs[x_col[k + 1] + i] = 1.0;
            coeffs[x_col[k] + i] -= 1.0;
            for j in 0..n {
                coeffs[x_col[k] + j] -= dt * a[i][j];
            }
            for j in 0..m {
                coeffs[u_col[k] + j] -= dt * b[i][j];
            }
            lp.push_row(coeffs, Relation::Eq, 0.0);
            row_kinds.push(RowKind::Dynamics { k, i });
        }
    }

    // State constraint d_k·x_k <= -e_k at every node; rows that are
    // identically satisfied (d = 0, e <= 0) are pruned.
    for k in 0..=nsteps {
        let d = problem.constraint_d.get(k);
        let e = *problem.constraint_e.get(k);
        if d.iter().all(|&v| v == 0.0) && e <= 0.0 {
            continue;
        }
        let mut coeffs = vec![0.0; ncols];
        for (j, &v) in d.iter().enumerate() {
            coeffs[x_col[k] + j] = v;
        }
        lp.push_row(coeffs, Relation::Le, -e);
        row_kinds.push(RowKind::State { k });
    }

    // Control polytope rows.
    for k in 0..nsteps {
        let u_set = problem.control_set.get(k);
        for (r, (crow, &rhs)) in u_set.c.iter().zip(&u_set.d).enumerate() {
            let mut coeffs = vec![0.0; ncols];
            for (j, &v) in crow.iter().enumerate() {
                coeffs[u_col[k] + j] = v;
            }
            lp.push_row(coeffs, Relation::Le, rhs);
            row_kinds.push(RowKind::Control { k, row: r });
        }
    }

    // Endpoint polytope rows over (x_0, x_N).
    for (r, (crow, &rhs)) in problem
        .endpoint_set
        .c
        .iter()
        .zip(&problem.endpoint_set.d)
        .enumerate()
    {
        let mut coeffs = vec![0.0; ncols];
        for (j, &v) in crow.iter().enumerate() {
            let col = if j < n {
                x_col[0] + j
            } else {
                x_col[nsteps] + (j - n)
            };
            coeffs[col] += v;
        }
        lp.push_row(coeffs, Relation::Le, rhs);
        row_kinds.push(RowKind::Endpoint { row: r });
    }

    // Running-cost epigraph rows: grad·(x_k, u_k) + offset <= s_{k,term}.
    for k in 0..nsteps {
        for (t, term) in problem.running_cost.get(k).terms.iter().enumerate() {
            for (p, piece) in term.pieces.iter().enumerate() {
                let mut coeffs = vec![0.0; ncols];
                for (j, &g) in piece.gradient.iter().enumerate() {
                    let col = if j < n {
                        x_col[k] + j
                    } else {
                        u_col[k] + (j - n)
                    };
                    coeffs[col] += g;
                }
                coeffs[s_col[k] + t] -= 1.0;
                lp.push_row(coeffs, Relation::Le, -piece.offset);
                row_kinds.push(RowKind::RunningEpigraph {
                    k,
                    term: t,
                    piece: p,
                });
            }
        }
    }

    // Endpoint-cost epigraph rows over (x_0, x_N).
    for (t, term) in problem.endpoint_cost.terms.iter().enumerate() {
        for (p, piece) in term.pieces.iter().enumerate() {
            let mut coeffs = vec![0.0; ncols];
            for (j, &g) in piece.gradient.iter().enumerate() {
                let col = if j < n {
                    x_col[0] + j
                } else {
                    x_col[nsteps] + (j - n)
                };
                coeffs[col] += g;
            }
            coeffs[se_col + t] -= 1.0;
            lp.push_row(coeffs, Relation::Le, -piece.offset);
            row_kinds.push(RowKind::EndpointEpigraph { term: t, piece: p });
        }
    }

    Ok(Transcription {
        lp,
        row_kinds,
        n,
        m,
        nsteps,
        x_col,
        u_col,
    })
}

/// Solves the transcription and audits the decoded optimum: the process
/// must be admissible within `1e-7` and its evaluated cost must match the
/// LP objective within `1e-8` scale-aware.
pub fn solve_direct(
    problem: &LcProblem,
    settings: &LpSettings,
) -> Result<DirectOutcome, DirectError> {
    let transcription = transcribe(problem)?;
    match solve_lp(&transcription.lp, settings)? {
        LpOutcome::Optimal { x, value, duals } => {
            let process = transcription.decode(&x);
            let report = check_admissible(problem, &process, 1e-7)?;
            if !report.admissible() {
                return Err(DirectError::Audit(format!(
                    "decoded optimum violates constraints by {:.3e}",
                    report.max_violation()
                )));
            }
            let evaluated = eval_cost(problem, &process)?;
            if (evaluated - value).abs() > 1e-8 * (1.0 + value.abs()) {
                return Err(DirectError::Audit(format!(
                    "evaluated cost {evaluated} disagrees with the LP value {value}"
                )));
            }
            Ok(DirectOutcome::Optimal {
                process,
                cost: value,
                duals,
            })
        }
        LpOutcome::Infeasible { certificate } => Ok(DirectOutcome::Infeasible { certificate }),
        LpOutcome::Unbounded { ray } => {
            // Map the LP-space ray back to a process-space direction.
            let process = transcription.decode(&ray);
            let mut flat = Vec::new();
            for xv in &process.x {
                flat.extend_from_slice(xv);
            }
            for uv in &process.u {
                flat.extend_from_slice(uv);
            }
            Ok(DirectOutcome::Unbounded { ray: flat })
        }
    }
}

/// One grid-refinement measurement.
#[derive(Debug, Clone)]
pub struct RefinementRow {
    pub n_steps: usize,
    pub cost: f64,
    pub max_state_violation: f64,
    pub runtime_seconds: f64,
}

/// Solves a family of grids and tabulates cost convergence.
pub fn refinement_table(
    build: impl Fn(usize) -> LcProblem,
    grids: &[usize],
    settings: &LpSettings,
) -> Result<Vec<RefinementRow>, DirectError> {
    let mut rows = Vec::with_capacity(grids.len());
    for &nsteps in grids {
        let problem = build(nsteps);
        let start = std::time::Instant::now();
        let outcome = solve_direct(&problem, settings)?;
        let runtime_seconds = start.elapsed().as_secs_f64();
        match outcome {
            DirectOutcome::Optimal { process, cost, .. } => {
                let max_state_violation = (0..=nsteps)
                    .map(|k| problem.h_value(k, &process.x[k]).max(0.0))
                    .fold(0.0f64, f64::max);
                rows.push(RefinementRow {
                    n_steps: nsteps,
                    cost,
                    max_state_violation,
                    runtime_seconds,
                });
            }
            DirectOutcome::Infeasible { .. } => {
                return Err(DirectError::Audit(format!(
                    "grid {nsteps}: problem reported infeasible during refinement"
                )))
            }
            DirectOutcome::Unbounded { .. } => {
                return Err(DirectError::Audit(format!(
                    "grid {nsteps}: problem reported unbounded during refinement"
                )))
            }
        }
    }
    Ok(rows)
}

/// Renders a refinement table as CSV (`N,cost,max_h_violation,runtime_s`).
pub fn refinement_csv(rows: &[RefinementRow]) -> String {
    let mut out = String::from("N,cost,max_h_violation,runtime_s\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.n_steps,
            crate::report::format_float(row.cost),
            crate::report::format_float(row.max_state_violation),
            crate::report::format_float(row.runtime_seconds),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linprog::verify_farkas;
    use crate::model::{AffinePiece, Grid, MaxAffine, PerNode, Polytope, PwaSum};
    use crate::testbed::riding_problem;

    /// Endpoint-cost-only instance: minimize x(b), x' = u on [0,1],
    /// u in [-1,1], x(0) = 0.
    fn bang_problem(nsteps: usize) -> LcProblem {
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
            Grid::new(0.0, 1.0, nsteps).unwrap(),
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

    #[test]
    fn riding_discrete_optimum_is_exact() {
        // Pointwise-lowest trajectory: descend at full speed, hold at 0.
        // Left Riemann cost = 0.5 + 1/N exactly for even N.
        for nsteps in [8usize, 16] {
            let p = riding_problem(nsteps);
            match solve_direct(&p, &LpSettings::default()).unwrap() {
                DirectOutcome::Optimal { cost, process, .. } => {
                    let expected = 0.5 + 1.0 / nsteps as f64;
                    assert!(
                        (cost - expected).abs() < 1e-9,
                        "N={nsteps}: cost {cost}, expected {expected}"
                    );
                    // The optimum rides the constraint on the second half.
                    assert!(process.x[nsteps][0].abs() < 1e-9);
                }
                other => panic!("expected optimal, got {other:?}"),
            }
        }
    }

    #[test]
    fn state_row_duals_respect_the_active_arc() {
        let nsteps = 8;
        let p = riding_problem(nsteps);
        let transcription = transcribe(&p).unwrap();
        match solve_direct(&p, &LpSettings::default()).unwrap() {
            DirectOutcome::Optimal { duals, process, .. } => {
                for (kind, dual) in transcription.row_kinds.iter().zip(&duals) {
                    if let RowKind::State { k } = kind {
                        let h = p.h_value(*k, &process.x[*k]);
                        if h < -1e-6 {
                            assert!(dual.abs() <= 1e-9, "inactive node {k} carries dual {dual}");
                        }
                        // Le rows in a minimization carry nonpositive duals.
                        assert!(*dual <= 1e-12);
                    }
                }
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn bang_instance_hits_the_reachability_edge() {
        let p = bang_problem(4);
        match solve_direct(&p, &LpSettings::default()).unwrap() {
            DirectOutcome::Optimal { cost, process, .. } => {
                assert!((cost + 1.0).abs() < 1e-9, "cost {cost}");
                for u in &process.u {
                    assert!((u[0] + 1.0).abs() < 1e-9);
                }
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn unreachable_endpoint_is_infeasible_with_certificate() {
        // x(0) = 0, x(1) = 10 with |u| <= 1: unreachable.
        let mut p = bang_problem(4);
        p.endpoint_set = Polytope {
            dim: 2,
            c: vec![
                vec![1.0, 0.0],
                vec![-1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, -1.0],
            ],
            d: vec![0.0, 0.0, 10.0, -10.0],
        };
        let transcription = transcribe(&p).unwrap();
        match solve_direct(&p, &LpSettings::default()).unwrap() {
            DirectOutcome::Infeasible { certificate } => {
                assert!(verify_farkas(&transcription.lp, &certificate, 1e-9).unwrap());
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn free_initial_state_with_linear_cost_is_unbounded() {
        let mut p = bang_problem(4);
        // Cost x(a), both endpoints free: push x(a) to minus infinity.
        p.endpoint_cost = PwaSum {
            terms: vec![MaxAffine {
                pieces: vec![AffinePiece {
                    gradient: vec![1.0, 0.0],
                    offset: 0.0,
                }],
            }],
        };
        p.endpoint_set = Polytope {
            dim: 2,
            c: vec![],
            d: vec![],
        };
        match solve_direct(&p, &LpSettings::default()).unwrap() {
            DirectOutcome::Unbounded { ray } => {
                assert!(ray[0] < 0.0, "initial state must descend, got {ray:?}");
            }
            other => panic!("expected unbounded, got {other:?}"),
        }
    }

    #[test]
    fn kink_cost_epigraph_is_exact() {
        // Running cost |x - u| with x(0) = 1, x' = u: LP cost equals the
        // evaluated PWA cost of the decoded optimum (audited inside
        // solve_direct; here we also pin the value).
        let nsteps = 6;
        let running = PwaSum {
            terms: vec![MaxAffine {
                pieces: vec![
                    AffinePiece {
                        gradient: vec![1.0, -1.0],
                        offset: 0.0,
                    },
                    AffinePiece {
                        gradient: vec![-1.0, 1.0],
                        offset: 0.0,
                    },
                ],
            }],
        };
        let endpoint_set = Polytope {
            dim: 2,
            c: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
            d: vec![1.0, -1.0],
        };
        let p = LcProblem::new(
            Grid::new(0.0, 1.0, nsteps).unwrap(),
            PerNode::Constant(vec![vec![0.0]]),
            PerNode::Constant(vec![vec![1.0]]),
            PerNode::Constant(vec![0.0]),
            PerNode::Constant(-1.0),
            PerNode::Constant(running),
            PwaSum::zero(),
            PerNode::Constant(Polytope::hyperbox(1, -1.0, 1.0)),
            endpoint_set,
            PerNode::Constant(vec![vec![-1.0], vec![1.0]]),
        );
        match solve_direct(&p, &LpSettings::default()).unwrap() {
            DirectOutcome::Optimal { cost, process, .. } => {
                let evaluated = eval_cost(&p, &process).unwrap();
                assert!((cost - evaluated).abs() < 1e-10);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn refinement_costs_converge_to_the_continuous_value() {
        let rows = refinement_table(riding_problem, &[16, 32, 64], &LpSettings::default()).unwrap();
        for row in &rows {
            let expected = 0.5 + 1.0 / row.n_steps as f64;
            assert!((row.cost - expected).abs() < 1e-9);
            assert!(row.max_state_violation <= 1e-9);
        }
        let csv = refinement_csv(&rows);
        assert!(csv.starts_with("N,cost,max_h_violation,runtime_s\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
