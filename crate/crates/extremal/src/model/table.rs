//! The certifier's universal input: per-node linearized and
//! subdifferential data extracted at a fixed candidate process.
//!
//! Compiling a (problem, candidate) pair freezes every set the multiplier
//! conditions quantify over — dynamics derivative matrices, running-cost
//! joint subdifferential generators, control-set normal cones, the
//! state-constraint values and gradient generators, pointwise-maximization
//! samples, and endpoint data — into finite generator lists. The certifier
//! then never touches the problem again: hand-built tables for instances
//! outside the linear-convex class (nonlinear dynamics with hand-derived
//! subdifferentials) enter through exactly the same struct.

use super::{check_admissible, vectors_close, Grid, LcProblem, ModelError, Process};
use crate::subdiff::{normal_cone, pwasum_subdiff, state_subdiff, StateDiffMode};

/// Where a table came from; sufficiency certificates require provenance
/// because they re-solve the original problem.
#[derive(Debug, Clone)]
pub enum TableOrigin {
    /// Compiled from a validated linear-convex problem at a candidate.
    LinearConvex {
        problem: Box<LcProblem>,
        process: Box<Process>,
    },
    /// Hand-authored data (instances outside the linear-convex class).
    HandCoded { label: String },
}

/// Per-node data defining the discrete multiplier system at one candidate.
///
/// Interval-indexed fields (`fx`, `fu`, `lsub`, `ncone`, `wsamples`) have
/// `grid.n_steps` entries; node-indexed fields (`h`, `gamma`, `tol_active`)
/// have `grid.n_steps + 1`.
#[derive(Debug, Clone)]
pub struct ExtremalDataTable {
    pub n: usize,
    pub m: usize,
    pub grid: Grid,
    /// State-derivative matrices of the dynamics along the candidate
    /// (`n x n`; the x-gradient of `q·f` is `fx_k' q`).
    pub fx: Vec<Vec<Vec<f64>>>,
    /// Control-derivative matrices (`n x m`; u-gradient of `q·f` is `fu_k' q`).
    pub fu: Vec<Vec<Vec<f64>>>,
    /// Joint running-cost subdifferential generators `(xi, zeta)` at the
    /// candidate, xi over states, zeta over controls.
    pub lsub: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
    /// Control-set normal-cone generators at the candidate control.
    pub ncone: Vec<Vec<Vec<f64>>>,
    /// Pointwise-maximization samples `(f value, running-cost value)`;
    /// entry 0 is always the candidate's own pair.
    pub wsamples: Vec<Vec<(Vec<f64>, f64)>>,
    /// State-constraint value at the candidate, per node.
    pub h: Vec<f64>,
    /// State-constraint gradient generators per node (violating-points
    /// limit set; may be empty where no violating sequence exists).
    pub gamma: Vec<Vec<Vec<f64>>>,
    /// Node activity tolerance: the constraint is treated active where
    /// `h >= -tol_active`.
    pub tol_active: Vec<f64>,
    /// Endpoint-cost subdifferential generators over `(x_first, x_last)`.
    pub l_sub: Vec<Vec<f64>>,
    /// Endpoint-set normal-cone generators over `(x_first, x_last)`.
    pub e_ncone: Vec<Vec<f64>>,
    pub origin: TableOrigin,
}

impl ExtremalDataTable {
    /// Structural validation of all lengths and dimensions.
    pub fn validate(&self) -> Result<(), ModelError> {
        let nsteps = self.grid.n_steps;
        let (n, m) = (self.n, self.m);
        let want = |len: usize, expected: usize, what: &str| -> Result<(), ModelError> {
            if len == expected {
                Ok(())
            } else {
                Err(ModelError::Dimension(format!(
                    "table {what}: {len} entries, expected {expected}"
                )))
            }
        };
        want(self.fx.len(), nsteps, "state-derivative matrices")?;
        want(self.fu.len(), nsteps, "control-derivative matrices")?;
        want(self.lsub.len(), nsteps, "running-cost generators")?;
        want(self.ncone.len(), nsteps, "normal-cone generators")?;
        want(self.wsamples.len(), nsteps, "maximization samples")?;
        want(self.h.len(), nsteps + 1, "constraint values")?;
        want(self.gamma.len(), nsteps + 1, "constraint gradients")?;
        want(self.tol_active.len(), nsteps + 1, "activity tolerances")?;
        for k in 0..nsteps {
            if self.fx[k].len() != n || self.fx[k].iter().any(|r| r.len() != n) {
                return Err(ModelError::Dimension(format!(
                    "state-derivative matrix at interval {k} is not {n}x{n}"
                )));
            }
            if self.fu[k].len() != n || self.fu[k].iter().any(|r| r.len() != m) {
                return Err(ModelError::Dimension(format!(
                    "control-derivative matrix at interval {k} is not {n}x{m}"
                )));
            }
            if self.lsub[k].is_empty() {
                return Err(ModelError::Invalid(format!(
                    "no running-cost subdifferential generators at interval {k}"
                )));
            }
            for (xi, zeta) in &self.lsub[k] {
                if xi.len() != n || zeta.len() != m {
                    return Err(ModelError::Dimension(format!(
                        "running-cost generator at interval {k} has shape ({}, {}), expected ({n}, {m})",
                        xi.len(),
                        zeta.len()
                    )));
                }
            }
            if self.ncone[k].iter().any(|g| g.len() != m) {
                return Err(ModelError::Dimension(format!(
                    "normal-cone generator at interval {k} has wrong length"
                )));
            }
            if self.wsamples[k].is_empty() {
                return Err(ModelError::Invalid(format!(
                    "no maximization samples at interval {k} (the candidate's own pair is required)"
                )));
            }
            for (fval, _) in &self.wsamples[k] {
                if fval.len() != n {
                    return Err(ModelError::Dimension(format!(
                        "maximization sample at interval {k} has f-length {}, expected {n}",
                        fval.len()
                    )));
                }
            }
        }
        for k in 0..=nsteps {
            if self.gamma[k].iter().any(|g| g.len() != n) {
                return Err(ModelError::Dimension(format!(
                    "constraint gradient generator at node {k} has wrong length"
                )));
            }
            if self.tol_active[k] <= 0.0 {
                return Err(ModelError::Invalid(format!(
                    "activity tolerance at node {k} must be positive"
                )));
            }
        }
        for g in &self.l_sub {
            if g.len() != 2 * n {
                return Err(ModelError::Dimension(
                    "endpoint-cost generator has wrong length".into(),
                ));
            }
        }
        if self.l_sub.is_empty() {
            return Err(ModelError::Invalid(
                "endpoint-cost subdifferential has no generators".into(),
            ));
        }
        for g in &self.e_ncone {
            if g.len() != 2 * n {
                return Err(ModelError::Dimension(
                    "endpoint-set normal generator has wrong length".into(),
                ));
            }
        }
        Ok(())
    }

    /// Whether the state constraint is active at node `k`.
    pub fn active(&self, k: usize) -> bool {
        self.h[k] >= -self.tol_active[k]
    }
}

/// Activity tolerance for subdifferential piece selection.
fn piece_tol(value: f64) -> f64 {
    1e-7 * (1.0 + value.abs())
}

/// Node activity tolerance for the state constraint.
fn node_tol(e: f64) -> f64 {
    1e-6 * (1.0 + e.abs())
}

/// Compiles a validated problem and admissible candidate into the
/// certifier's data table.
///
/// `tol` is the admissibility tolerance; an inadmissible candidate is
/// rejected with its full residual report. Maximization samples are the
/// union of the problem's listed samples and the control polytope's
/// vertices, with the candidate's own pair first.
pub fn compile(
    problem: &LcProblem,
    candidate: &Process,
    tol: f64,
) -> Result<ExtremalDataTable, ModelError> {
    problem.validate(tol)?;
    let report = check_admissible(problem, candidate, tol)?;
    if !report.admissible() {
        return Err(ModelError::Inadmissible(Box::new(report)));
    }
    let nsteps = problem.grid.n_steps;
    let (n, m) = (problem.n, problem.m);
    let generator_bound = crate::subdiff::DEFAULT_GENERATOR_BOUND;

    let mut fx = Vec::with_capacity(nsteps);
    let mut fu = Vec::with_capacity(nsteps);
    let mut lsub = Vec::with_capacity(nsteps);
    let mut ncone = Vec::with_capacity(nsteps);
    let mut wsamples = Vec::with_capacity(nsteps);
    for k in 0..nsteps {
        let a = problem.a_mat.get(k).clone();
        let b = problem.b_mat.get(k).clone();
        let xk = &candidate.x[k];
        let uk = &candidate.u[k];

        // Joint running-cost subdifferential at (x_k, u_k).
        let mut z = xk.clone();
        z.extend_from_slice(uk);
        let lk = problem.running_cost.get(k);
        let joint = pwasum_subdiff(lk, &z, piece_tol(lk.eval(&z)), generator_bound)?;
        lsub.push(
            joint
                .points
                .into_iter()
                .map(|g| (g[..n].to_vec(), g[n..].to_vec()))
                .collect(),
        );

        ncone.push(normal_cone(problem.control_set.get(k), uk, tol)?.points);

        // Samples: candidate's own pair first, then listed samples and the
        // control polytope's vertices (deduplicated against the candidate
        // control and each other).
        let eval_pair = |u: &[f64]| -> (Vec<f64>, f64) {
            let f: Vec<f64> = (0..n)
                .map(|i| {
                    let ax: f64 = a[i].iter().zip(xk).map(|(v, x)| v * x).sum();
                    let bu: f64 = b[i].iter().zip(u).map(|(v, w)| v * w).sum();
                    ax + bu
                })
                .collect();
            let mut zx = xk.clone();
            zx.extend_from_slice(u);
            (f, lk.eval(&zx))
        };
        let mut controls: Vec<Vec<f64>> = vec![uk.clone()];
        for u in problem
            .weierstrass_samples
            .get(k)
            .iter()
            .cloned()
            .chain(problem.control_set.get(k).vertices()?)
        {
            if !controls.iter().any(|c| vectors_close(c, &u, 1e-9)) {
                controls.push(u);
            }
        }
        wsamples.push(controls.iter().map(|u| eval_pair(u)).collect());

        fx.push(a);
        fu.push(b);
    }

    let mut h = Vec::with_capacity(nsteps + 1);
    let mut gamma = Vec::with_capacity(nsteps + 1);
    let mut tol_active = Vec::with_capacity(nsteps + 1);
    for k in 0..=nsteps {
        h.push(problem.h_value(k, &candidate.x[k]));
        gamma.push(
            state_subdiff(problem, k, &candidate.x[k], StateDiffMode::ViolatingPoints).points,
        );
        tol_active.push(node_tol(*problem.constraint_e.get(k)));
    }

    let mut endpoint_arg = candidate.x[0].clone();
    endpoint_arg.extend_from_slice(&candidate.x[nsteps]);
    let l_value = problem.endpoint_cost.eval(&endpoint_arg);
    let l_sub = pwasum_subdiff(
        &problem.endpoint_cost,
        &endpoint_arg,
        piece_tol(l_value),
        generator_bound,
    )?
    .points;
    let e_ncone = normal_cone(&problem.endpoint_set, &endpoint_arg, tol)?.points;

    let table = ExtremalDataTable {
        n,
        m,
        grid: problem.grid,
        fx,
        fu,
        lsub,
        ncone,
        wsamples,
        h,
        gamma,
        tol_active,
        l_sub,
        e_ncone,
        origin: TableOrigin::LinearConvex {
            problem: Box::new(problem.clone()),
            process: Box::new(candidate.clone()),
        },
    };
    table.validate()?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{riding_optimum, riding_problem};
    use super::super::{
        AffinePiece, Grid, LcProblem, MaxAffine, PerNode, Polytope, Process, PwaSum,
    };
    use super::*;

    /// 1D kink problem: dynamics x' = u, running cost |x - u|, box controls.
    fn kink_problem(nsteps: usize) -> LcProblem {
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
        // Endpoints: x_first = 0, x_last free.
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
            PerNode::Constant(-1.0), // h = -1: never active
            PerNode::Constant(running),
            PwaSum::zero(),
            PerNode::Constant(Polytope::hyperbox(1, -1.0, 1.0)),
            endpoint_set,
            PerNode::Constant(vec![]),
        )
    }

    #[test]
    fn kink_candidate_gets_both_generators() {
        // Candidate x = u = 0 sits on the |x - u| kink: joint generators
        // (1, -1) and (-1, 1).
        let p = kink_problem(4);
        let proc = Process {
            x: vec![vec![0.0]; 5],
            u: vec![vec![0.0]; 4],
        };
        let table = compile(&p, &proc, 1e-7).unwrap();
        assert_eq!(
            table.lsub[0],
            vec![(vec![1.0], vec![-1.0]), (vec![-1.0], vec![1.0]),]
        );
        // Interior control: empty normal cone.
        assert!(table.ncone[0].is_empty());
        // Samples: candidate's own pair first, then the box vertices.
        assert_eq!(table.wsamples[0][0], (vec![0.0], 0.0));
        assert_eq!(table.wsamples[0].len(), 3);
        // Inactive constraint everywhere; gradient set is empty (d = 0,
        // e < 0: no violating points exist).
        assert!(table.h.iter().all(|&h| h == -1.0));
        assert!(table.gamma.iter().all(|g| g.is_empty()));
        assert!(!table.active(0));
    }

    #[test]
    fn vertex_control_gets_box_normals() {
        // Candidate control at the corner (1) of [-1, 1]: one outward normal.
        let p = kink_problem(4);
        let dt = 0.25;
        let mut x = vec![vec![0.0]];
        for k in 0..4 {
            x.push(vec![x[k][0] + dt]);
        }
        let proc = Process {
            x,
            u: vec![vec![1.0]; 4],
        };
        let table = compile(&p, &proc, 1e-7).unwrap();
        assert_eq!(table.ncone[0], vec![vec![1.0]]);
    }

    #[test]
    fn riding_table_marks_the_active_arc() {
        let nsteps = 8;
        let p = riding_problem(nsteps);
        let proc = riding_optimum(nsteps);
        let table = compile(&p, &proc, 1e-7).unwrap();
        // h = -x: zero (active) exactly from the midpoint on.
        for k in 0..=nsteps {
            assert_eq!(table.active(k), k >= nsteps / 2, "node {k}");
        }
        // Constraint gradient generators: always {-1} (d != 0).
        assert!(table.gamma.iter().all(|g| g == &vec![vec![-1.0]]));
        // Running cost is smooth: single generator (1, 0).
        assert_eq!(table.lsub[0], vec![(vec![1.0], vec![0.0])]);
        // Samples: own pair + two box vertices (dedup: u = -1 on the
        // descent arc coincides with a vertex).
        assert_eq!(table.wsamples[0].len(), 2);
        assert_eq!(table.wsamples[nsteps - 1].len(), 3);
    }

    #[test]
    fn inadmissible_candidates_are_rejected_with_reports() {
        let p = riding_problem(4);
        let mut proc = riding_optimum(4);
        proc.x[3][0] = -0.5; // below the floor and breaking dynamics
        match compile(&p, &proc, 1e-7) {
            Err(ModelError::Inadmissible(report)) => {
                assert!(report.max_violation() >= 0.5);
            }
            other => panic!("expected inadmissibility, got {other:?}"),
        }
    }

    #[test]
    fn recompiling_yields_identical_tables() {
        let p = riding_problem(8);
        let proc = riding_optimum(8);
        let t1 = compile(&p, &proc, 1e-7).unwrap();
        let t2 = compile(&p, &proc, 1e-7).unwrap();
        assert_eq!(t1.lsub, t2.lsub);
        assert_eq!(t1.wsamples, t2.wsamples);
        assert_eq!(t1.gamma, t2.gamma);
        assert_eq!(t1.h, t2.h);
    }
}
