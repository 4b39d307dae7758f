//! Problem representation: linear-convex state-constrained optimal control
//! problems on a uniform grid, candidate processes, and the compiled
//! per-node data table the certifier consumes.
//!
//! The continuous problem class handled here has linear dynamics
//! `x' = A(t)x + B(t)u`, convex piecewise-affine running and endpoint costs,
//! polytopic control and endpoint sets, and one scalar affine state
//! constraint `h(t, x) = d(t)·x + e(t) <= 0`. Time-varying data is sampled
//! at grid nodes and held constant on each interval (left value); the cost
//! integral is a left-endpoint Riemann sum, matching the explicit Euler
//! transcription used everywhere else so primal and dual discretizations
//! line up exactly.

mod table;

pub mod io;

pub use table::{compile, ExtremalDataTable, TableOrigin};

use crate::linprog::{solve_lp, LpError, LpOutcome, LpProblem, LpSettings, Relation};
use crate::subdiff::SubdiffError;

/// Errors from model construction, validation, and compilation.
#[derive(Debug)]
pub enum ModelError {
    /// Inconsistent dimensions anywhere in the data.
    Dimension(String),
    /// Structural violations: empty pieces, bad grids, non-compact control
    /// sets, empty required sets, and similar.
    Invalid(String),
    /// A candidate process failed the admissibility check.
    Inadmissible(Box<AdmissibilityReport>),
    /// A validation linear program failed.
    Lp(LpError),
    /// Subdifferential computation failed.
    Subdiff(SubdiffError),
}

impl std::fmt::Display for ModelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelError::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            ModelError::Invalid(msg) => write!(f, "invalid problem data: {msg}"),
            ModelError::Inadmissible(report) => write!(
                f,
                "candidate process is not admissible: worst violation {:.3e} (tolerance {:.3e})",
                report.max_violation(),
                report.tol
            ),
            ModelError::Lp(e) => write!(f, "validation solve failed: {e}"),
            ModelError::Subdiff(e) => write!(f, "subdifferential computation failed: {e}"),
        }
    }
}

impl std::error::Error for ModelError {}

impl From<LpError> for ModelError {
    fn from(e: LpError) -> Self {
        ModelError::Lp(e)
    }
}

impl From<SubdiffError> for ModelError {
    fn from(e: SubdiffError) -> Self {
        ModelError::Subdiff(e)
    }
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Uniform time grid on `[a, b]` with `n_steps` intervals and nodes
/// `t_k = a + k (b-a)/n_steps`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub n_steps: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, n_steps: usize) -> Result<Grid, ModelError> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(ModelError::Invalid(format!(
                "grid needs b > a, got [{a}, {b}]"
            )));
        }
        if n_steps < 2 {
            return Err(ModelError::Invalid(format!(
                "grid needs at least 2 steps, got {n_steps}"
            )));
        }
        Ok(Grid { a, b, n_steps })
    }

    pub fn dt(&self) -> f64 {
        (self.b - self.a) / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.a + self.dt() * k as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }
}

// ---------------------------------------------------------------------------
// Piecewise-affine convex functions
// ---------------------------------------------------------------------------

/// One affine piece `gradient · z + offset`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffinePiece {
    pub gradient: Vec<f64>,
    pub offset: f64,
}

impl AffinePiece {
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.gradient.iter().zip(z).map(|(g, v)| g * v).sum::<f64>() + self.offset
    }
}

/// Convex piecewise-affine function `max` over affine pieces.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxAffine {
    pub pieces: Vec<AffinePiece>,
}

impl MaxAffine {
    /// Constant function (a single zero-gradient piece).
    pub fn constant(dim: usize, value: f64) -> MaxAffine {
        MaxAffine {
            pieces: vec![AffinePiece {
                gradient: vec![0.0; dim],
                offset: value,
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.pieces.first().map_or(0, |p| p.gradient.len())
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.eval(z))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn validate(&self, dim: usize, what: &str) -> Result<(), ModelError> {
        if self.pieces.is_empty() {
            return Err(ModelError::Invalid(format!("{what}: no affine pieces")));
        }
        for p in &self.pieces {
            if p.gradient.len() != dim {
                return Err(ModelError::Dimension(format!(
                    "{what}: piece gradient has length {}, expected {dim}",
                    p.gradient.len()
                )));
            }
            if !p.offset.is_finite() || p.gradient.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Invalid(format!("{what}: non-finite piece")));
            }
        }
        Ok(())
    }
}

/// Sum of max-affine terms — still convex and piecewise-affine, with a
/// subdifferential equal to the Minkowski sum of the term subdifferentials.
/// An empty term list is the zero function.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct PwaSum {
    pub terms: Vec<MaxAffine>,
}

impl PwaSum {
    pub fn zero() -> PwaSum {
        PwaSum { terms: Vec::new() }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(z)).sum()
    }

    fn validate(&self, dim: usize, what: &str) -> Result<(), ModelError> {
        for (i, term) in self.terms.iter().enumerate() {
            term.validate(dim, &format!("{what} term {i}"))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Polytopes
// ---------------------------------------------------------------------------

/// Convex polyhedron `{z : C z <= d}` in H-representation. Equalities are
/// expressed as opposite row pairs. An empty row list is all of space.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polytope {
    pub dim: usize,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub d: Vec<f64>,
}

impl Polytope {
    /// The box `[lo, hi]^dim`.
    pub fn hyperbox(dim: usize, lo: f64, hi: f64) -> Polytope {
        let mut c = Vec::with_capacity(2 * dim);
        let mut d = Vec::with_capacity(2 * dim);
        for j in 0..dim {
            let mut row = vec![0.0; dim];
            row[j] = 1.0;
            c.push(row);
            d.push(hi);
            let mut row = vec![0.0; dim];
            row[j] = -1.0;
            c.push(row);
            d.push(-lo);
        }
        Polytope { dim, c, d }
    }

    fn validate(&self, what: &str) -> Result<(), ModelError> {
        if self.c.len() != self.d.len() {
            return Err(ModelError::Dimension(format!(
                "{what}: {} rows vs {} right-hand sides",
                self.c.len(),
                self.d.len()
            )));
        }
        for row in &self.c {
            if row.len() != self.dim {
                return Err(ModelError::Dimension(format!(
                    "{what}: row length {} vs dimension {}",
                    row.len(),
                    self.dim
                )));
            }
        }
        let finite =
            self.d.iter().all(|v| v.is_finite()) && self.c.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(ModelError::Invalid(format!("{what}: non-finite data")));
        }
        Ok(())
    }

    /// Largest constraint residual `max_i (c_i·z - d_i)`, clamped at zero;
    /// zero means membership.
    pub fn violation(&self, z: &[f64]) -> f64 {
        self.c
            .iter()
            .zip(&self.d)
            .map(|(row, &rhs)| row.iter().zip(z).map(|(a, v)| a * v).sum::<f64>() - rhs)
            .fold(0.0f64, f64::max)
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        self.violation(z) <= tol
    }

    /// Feasibility of the H-representation, decided by a linear program.
    pub fn is_nonempty(&self) -> Result<bool, ModelError> {
        let lp = self.membership_lp(vec![0.0; self.dim]);
        match solve_lp(&lp, &LpSettings::default())? {
            LpOutcome::Optimal { .. } | LpOutcome::Unbounded { .. } => Ok(true),
            LpOutcome::Infeasible { .. } => Ok(false),
        }
    }

    /// Boundedness, decided by extremizing each coordinate.
    pub fn is_bounded(&self) -> Result<bool, ModelError> {
        for j in 0..self.dim {
            for sign in [1.0, -1.0] {
                let mut objective = vec![0.0; self.dim];
                objective[j] = sign;
                let lp = self.membership_lp(objective);
                match solve_lp(&lp, &LpSettings::default())? {
                    LpOutcome::Unbounded { .. } => return Ok(false),
                    LpOutcome::Optimal { .. } => {}
                    LpOutcome::Infeasible { .. } => return Ok(true), // empty is bounded
                }
            }
        }
        Ok(true)
    }

    fn membership_lp(&self, objective: Vec<f64>) -> LpProblem {
        let mut lp = LpProblem::minimize(objective);
        for (row, &rhs) in self.c.iter().zip(&self.d) {
            lp.push_row(row.clone(), Relation::Le, rhs);
        }
        lp
    }

    /// All vertices (feasible intersection points of `dim` independent
    /// active rows), deduplicated. Unbounded polyhedra simply yield the
    /// vertices they have — possibly none.
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>, ModelError> {
        let n = self.dim;
        if n == 0 || self.c.len() < n {
            return Ok(Vec::new());
        }
        let mut verts: Vec<Vec<f64>> = Vec::new();
        let mut subset: Vec<usize> = (0..n).collect();
        loop {
            let a: Vec<Vec<f64>> = subset.iter().map(|&i| self.c[i].clone()).collect();
            let b: Vec<f64> = subset.iter().map(|&i| self.d[i]).collect();
            if let Some(z) = gaussian_solve(a, b) {
                if self.contains(
                    &z,
                    1e-9 * (1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
                ) && !verts.iter().any(|v| vectors_close(v, &z, 1e-9))
                {
                    verts.push(z);
                }
            }
            let total = self.c.len();
            let mut k = n;
            loop {
                if k == 0 {
                    return Ok(verts);
                }
                k -= 1;
                if subset[k] + 1 <= total - (n - k) {
                    subset[k] += 1;
                    for i in k + 1..n {
                        subset[i] = subset[i - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

/// Componentwise closeness with a scale-aware tolerance.
pub(crate) fn vectors_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn gaussian_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot_abs < 1e-11 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[r][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

// ---------------------------------------------------------------------------
// Per-node data
// ---------------------------------------------------------------------------

/// Grid-indexed data that is either constant or listed per node/interval.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum PerNode<T> {
    Constant(T),
    Each(Vec<T>),
}

impl<T> PerNode<T> {
    pub fn get(&self, k: usize) -> &T {
        match self {
            PerNode::Constant(v) => v,
            PerNode::Each(vs) => &vs[k],
        }
    }

    pub fn check_len(&self, expected: usize, what: &str) -> Result<(), ModelError> {
        match self {
            PerNode::Constant(_) => Ok(()),
            PerNode::Each(vs) if vs.len() == expected => Ok(()),
            PerNode::Each(vs) => Err(ModelError::Dimension(format!(
                "{what}: {} entries, expected {expected}",
                vs.len()
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// The problem and its processes
// ---------------------------------------------------------------------------

/// Linear-convex state-constrained problem on a uniform grid.
///
/// Interval-indexed data (`a_mat`, `b_mat`, `running_cost`, `control_set`,
/// `weierstrass_samples`) has `n_steps` entries when listed; node-indexed
/// data (`constraint_d`, `constraint_e`) has `n_steps + 1`.
#[derive(Debug, Clone)]
pub struct LcProblem {
    pub grid: Grid,
    /// State dimension.
    pub n: usize,
    /// Control dimension.
    pub m: usize,
    /// Dynamics state coupling, one `n x n` matrix per interval.
    pub a_mat: PerNode<Vec<Vec<f64>>>,
    /// Dynamics control coupling, one `n x m` matrix per interval.
    pub b_mat: PerNode<Vec<Vec<f64>>>,
    /// State-constraint gradient `d_k` per node: `h = d·x + e <= 0`.
    pub constraint_d: PerNode<Vec<f64>>,
    /// State-constraint offset `e_k` per node.
    pub constraint_e: PerNode<f64>,
    /// Running cost over `(x, u)`, per interval.
    pub running_cost: PerNode<PwaSum>,
    /// Endpoint cost over `(x_first, x_last)`.
    pub endpoint_cost: PwaSum,
    /// Control polytope per interval.
    pub control_set: PerNode<Polytope>,
    /// Endpoint polytope over `(x_first, x_last)`.
    pub endpoint_set: Polytope,
    /// Control points entering the pointwise maximization check, per
    /// interval; the compiler unions these with the control polytope's
    /// vertices, so listing the vertices here is welcome but not required.
    pub weierstrass_samples: PerNode<Vec<Vec<f64>>>,
}

impl LcProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Grid,
        a_mat: PerNode<Vec<Vec<f64>>>,
        b_mat: PerNode<Vec<Vec<f64>>>,
        constraint_d: PerNode<Vec<f64>>,
        constraint_e: PerNode<f64>,
        running_cost: PerNode<PwaSum>,
        endpoint_cost: PwaSum,
        control_set: PerNode<Polytope>,
        endpoint_set: Polytope,
        weierstrass_samples: PerNode<Vec<Vec<f64>>>,
    ) -> LcProblem {
        let n = constraint_d.get(0).len();
        let m = control_set.get(0).dim;
        LcProblem {
            grid,
            n,
            m,
            a_mat,
            b_mat,
            constraint_d,
            constraint_e,
            running_cost,
            endpoint_cost,
            control_set,
            endpoint_set,
            weierstrass_samples,
        }
    }

    /// Full structural validation: dimensions, per-node lengths, finite
    /// data, compact nonempty control sets, nonempty endpoint set, and
    /// sample membership (each listed sample inside its control set within
    /// `tol`).
    pub fn validate(&self, tol: f64) -> Result<(), ModelError> {
        let nsteps = self.grid.n_steps;
        let (n, m) = (self.n, self.m);
        Grid::new(self.grid.a, self.grid.b, nsteps)?;

        self.a_mat.check_len(nsteps, "dynamics state matrices")?;
        self.b_mat.check_len(nsteps, "dynamics control matrices")?;
        self.running_cost.check_len(nsteps, "running cost")?;
        self.control_set.check_len(nsteps, "control sets")?;
        self.weierstrass_samples
            .check_len(nsteps, "control samples")?;
        self.constraint_d
            .check_len(nsteps + 1, "state-constraint gradients")?;
        self.constraint_e
            .check_len(nsteps + 1, "state-constraint offsets")?;

        for k in 0..nsteps {
            let a = self.a_mat.get(k);
            if a.len() != n || a.iter().any(|row| row.len() != n) {
                return Err(ModelError::Dimension(format!(
                    "state matrix at interval {k} is not {n}x{n}"
                )));
            }
            let b = self.b_mat.get(k);
            if b.len() != n || b.iter().any(|row| row.len() != m) {
                return Err(ModelError::Dimension(format!(
                    "control matrix at interval {k} is not {n}x{m}"
                )));
            }
            if a.iter().flatten().any(|v| !v.is_finite())
                || b.iter().flatten().any(|v| !v.is_finite())
            {
                return Err(ModelError::Invalid(format!(
                    "non-finite dynamics data at interval {k}"
                )));
            }
            self.running_cost
                .get(k)
                .validate(n + m, &format!("running cost at interval {k}"))?;
            let u_set = self.control_set.get(k);
            u_set.validate(&format!("control set at interval {k}"))?;
            if u_set.dim != m {
                return Err(ModelError::Dimension(format!(
                    "control set at interval {k} has dimension {}, expected {m}",
                    u_set.dim
                )));
            }
            for (s, sample) in self.weierstrass_samples.get(k).iter().enumerate() {
                if sample.len() != m {
                    return Err(ModelError::Dimension(format!(
                        "control sample {s} at interval {k} has length {}, expected {m}",
                        sample.len()
                    )));
                }
                if !u_set.contains(sample, tol) {
                    return Err(ModelError::Invalid(format!(
                        "control sample {s} at interval {k} lies outside the control set by {:.3e}",
                        u_set.violation(sample)
                    )));
                }
            }
        }
        for k in 0..=nsteps {
            let d = self.constraint_d.get(k);
            if d.len() != n {
                return Err(ModelError::Dimension(format!(
                    "state-constraint gradient at node {k} has length {}, expected {n}",
                    d.len()
                )));
            }
            if !self.constraint_e.get(k).is_finite() || d.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Invalid(format!(
                    "non-finite state-constraint data at node {k}"
                )));
            }
        }
        self.endpoint_cost.validate(2 * n, "endpoint cost")?;
        self.endpoint_set.validate("endpoint set")?;
        if self.endpoint_set.dim != 2 * n {
            return Err(ModelError::Dimension(format!(
                "endpoint set has dimension {}, expected {}",
                self.endpoint_set.dim,
                2 * n
            )));
        }

        // Set-level checks by linear programming. Control sets must be
        // compact and nonempty (pointwise maximization needs both); the
        // endpoint set only needs to be nonempty.
        let mut checked_constant_control = false;
        for k in 0..nsteps {
            if matches!(self.control_set, PerNode::Constant(_)) && checked_constant_control {
                break;
            }
            let u_set = self.control_set.get(k);
            if !u_set.is_nonempty()? {
                return Err(ModelError::Invalid(format!(
                    "control set at interval {k} is empty"
                )));
            }
            if !u_set.is_bounded()? {
                return Err(ModelError::Invalid(format!(
                    "control set at interval {k} is unbounded"
                )));
            }
            checked_constant_control = true;
        }
        if !self.endpoint_set.is_nonempty()? {
            return Err(ModelError::Invalid("endpoint set is empty".into()));
        }
        Ok(())
    }

    /// State-constraint value `h(t_k, x) = d_k·x + e_k`.
    pub fn h_value(&self, k: usize, x: &[f64]) -> f64 {
        let d = self.constraint_d.get(k);
        d.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + self.constraint_e.get(k)
    }

    /// Rebuilds the problem on a grid with `n_steps` intervals over the
    /// same time window.
    ///
    /// Only constant-in-time data can be re-gridded: per-node lists are
    /// collapsed when all entries coincide and refused otherwise, since
    /// resampling genuinely time-varying data would silently change the
    /// problem.
    pub fn with_n_steps(&self, n_steps: usize) -> Result<LcProblem, ModelError> {
        fn collapse<T: Clone + PartialEq>(
            per_node: &PerNode<T>,
            what: &str,
        ) -> Result<PerNode<T>, ModelError> {
            match per_node {
                PerNode::Constant(v) => Ok(PerNode::Constant(v.clone())),
                PerNode::Each(vs) => match vs.first() {
                    Some(first) if vs.iter().all(|v| v == first) => {
                        Ok(PerNode::Constant(first.clone()))
                    }
                    _ => Err(ModelError::Invalid(format!(
                        "{what} varies over the grid and cannot be re-gridded"
                    ))),
                },
            }
        }
        Ok(LcProblem::new(
            Grid::new(self.grid.a, self.grid.b, n_steps)?,
            collapse(&self.a_mat, "dynamics state matrix")?,
            collapse(&self.b_mat, "dynamics control matrix")?,
            collapse(&self.constraint_d, "state-constraint gradient")?,
            collapse(&self.constraint_e, "state-constraint offset")?,
            collapse(&self.running_cost, "running cost")?,
            self.endpoint_cost.clone(),
            collapse(&self.control_set, "control set")?,
            self.endpoint_set.clone(),
            collapse(&self.weierstrass_samples, "control samples")?,
        ))
    }
}

/// A discrete process: states at nodes `0..=n_steps`, controls on intervals
/// `0..n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Process {
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl Process {
    fn check_dims(&self, problem: &LcProblem) -> Result<(), ModelError> {
        let nsteps = problem.grid.n_steps;
        if self.x.len() != nsteps + 1 {
            return Err(ModelError::Dimension(format!(
                "process has {} state vectors, expected {}",
                self.x.len(),
                nsteps + 1
            )));
        }
        if self.u.len() != nsteps {
            return Err(ModelError::Dimension(format!(
                "process has {} control vectors, expected {nsteps}",
                self.u.len()
            )));
        }
        if let Some(bad) = self.x.iter().position(|x| x.len() != problem.n) {
            return Err(ModelError::Dimension(format!(
                "state vector at node {bad} has length {}, expected {}",
                self.x[bad].len(),
                problem.n
            )));
        }
        if let Some(bad) = self.u.iter().position(|u| u.len() != problem.m) {
            return Err(ModelError::Dimension(format!(
                "control vector at interval {bad} has length {}, expected {}",
                self.u[bad].len(),
                problem.m
            )));
        }
        Ok(())
    }
}

/// Discrete cost of a process: endpoint cost plus the left-endpoint Riemann
/// sum of the running cost.
pub fn eval_cost(problem: &LcProblem, process: &Process) -> Result<f64, ModelError> {
    process.check_dims(problem)?;
    let nsteps = problem.grid.n_steps;
    let dt = problem.grid.dt();
    let mut endpoint_arg = process.x[0].clone();
    endpoint_arg.extend_from_slice(&process.x[nsteps]);
    let mut cost = problem.endpoint_cost.eval(&endpoint_arg);
    for k in 0..nsteps {
        let mut z = process.x[k].clone();
        z.extend_from_slice(&process.u[k]);
        cost += dt * problem.running_cost.get(k).eval(&z);
    }
    Ok(cost)
}

/// Per-constraint residuals of a candidate process.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AdmissibilityReport {
    /// Max-norm Euler dynamics residual per interval.
    pub dynamics_residuals: Vec<f64>,
    /// `max(0, h_k)` per node.
    pub state_violations: Vec<f64>,
    /// Control-polytope violation per interval.
    pub control_violations: Vec<f64>,
    /// Endpoint-polytope violation.
    pub endpoint_violation: f64,
    /// Tolerance the verdict uses.
    pub tol: f64,
}

impl AdmissibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.dynamics_residuals
            .iter()
            .chain(&self.state_violations)
            .chain(&self.control_violations)
            .chain(std::iter::once(&self.endpoint_violation))
            .fold(0.0f64, |m, &v| m.max(v))
    }

    pub fn admissible(&self) -> bool {
        self.max_violation() <= self.tol
    }
}

/// Evaluates all constraint residuals of a candidate process.
pub fn check_admissible(
    problem: &LcProblem,
    process: &Process,
    tol: f64,
) -> Result<AdmissibilityReport, ModelError> {
    process.check_dims(problem)?;
    let nsteps = problem.grid.n_steps;
    let dt = problem.grid.dt();
    let mut dynamics_residuals = Vec::with_capacity(nsteps);
    let mut control_violations = Vec::with_capacity(nsteps);
    for k in 0..nsteps {
        let a = problem.a_mat.get(k);
        let b = problem.b_mat.get(k);
        let mut worst = 0.0f64;
        for i in 0..problem.n {
            let ax: f64 = a[i].iter().zip(&process.x[k]).map(|(v, x)| v * x).sum();
            let bu: f64 = b[i].iter().zip(&process.u[k]).map(|(v, u)| v * u).sum();
            let residual = process.x[k + 1][i] - process.x[k][i] - dt * (ax + bu);
            worst = worst.max(residual.abs());
        }
        dynamics_residuals.push(worst);
        control_violations.push(problem.control_set.get(k).violation(&process.u[k]));
    }
    let state_violations = (0..=nsteps)
        .map(|k| problem.h_value(k, &process.x[k]).max(0.0))
        .collect();
    let mut endpoint_arg = process.x[0].clone();
    endpoint_arg.extend_from_slice(&process.x[nsteps]);
    let endpoint_violation = problem.endpoint_set.violation(&endpoint_arg);
    Ok(AdmissibilityReport {
        dynamics_residuals,
        state_violations,
        control_violations,
        endpoint_violation,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    pub(crate) use crate::testbed::{riding_optimum, riding_problem};

    #[test]
    fn grid_arithmetic() {
        let g = Grid::new(0.0, 2.0, 4).unwrap();
        assert_eq!(g.dt(), 0.5);
        assert_eq!(g.node(3), 1.5);
        assert_eq!(g.n_nodes(), 5);
        assert!(Grid::new(1.0, 1.0, 4).is_err());
        assert!(Grid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn constant_endpoint_cost_dominates() {
        // Zero running cost, l = 5: cost 5 for any process.
        let mut p = riding_problem(4);
        p.running_cost = PerNode::Constant(PwaSum::zero());
        p.endpoint_cost = PwaSum {
            terms: vec![MaxAffine::constant(2, 5.0)],
        };
        let proc = riding_optimum(4);
        assert_eq!(eval_cost(&p, &proc).unwrap(), 5.0);
    }

    #[test]
    fn riding_instance_validates_and_costs_correctly() {
        let nsteps = 8;
        let p = riding_problem(nsteps);
        p.validate(1e-7).unwrap();
        let proc = riding_optimum(nsteps);
        let report = check_admissible(&p, &proc, 1e-7).unwrap();
        assert!(report.admissible(), "violations: {report:?}");
        // Left Riemann sum of the descent-then-hold trajectory:
        // dt * sum_{k<half} (1 - k dt) = 0.5 + dt/2 = 0.5 + 1/nsteps.
        let cost = eval_cost(&p, &proc).unwrap();
        let expected = 0.5 + 1.0 / nsteps as f64;
        assert!((cost - expected).abs() < 1e-12, "cost {cost}");
    }

    #[test]
    fn broken_dynamics_show_in_the_report() {
        let p = riding_problem(4);
        let mut proc = riding_optimum(4);
        proc.x[2][0] += 0.125;
        let report = check_admissible(&p, &proc, 1e-7).unwrap();
        assert!(!report.admissible());
        assert!((report.dynamics_residuals[1] - 0.125).abs() < 1e-12);
        // The following interval sees the perturbation too.
        assert!((report.dynamics_residuals[2] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn state_constraint_violation_is_reported_per_node() {
        let p = riding_problem(4);
        let mut proc = riding_optimum(4);
        for x in proc.x.iter_mut() {
            x[0] -= 2.0; // shift the whole trajectory below the floor
        }
        let report = check_admissible(&p, &proc, 1e-7).unwrap();
        // h = -x: nodes that were at 0 now violate by 2.
        assert!((report.state_violations[4] - 2.0).abs() < 1e-12);
        assert!(!report.admissible());
    }

    #[test]
    fn box_vertices_enumerate_correctly() {
        let b = Polytope::hyperbox(2, -1.0, 1.0);
        let mut vs = b.vertices().unwrap();
        vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            vs,
            vec![
                vec![-1.0, -1.0],
                vec![-1.0, 1.0],
                vec![1.0, -1.0],
                vec![1.0, 1.0]
            ]
        );
        assert!(b.is_bounded().unwrap());
        assert!(b.is_nonempty().unwrap());
    }

    #[test]
    fn unbounded_sets_are_detected() {
        // {(z1, z2) : z1 <= 0} — a half-space.
        let p = Polytope {
            dim: 2,
            c: vec![vec![1.0, 0.0]],
            d: vec![0.0],
        };
        assert!(!p.is_bounded().unwrap());
        assert!(p.is_nonempty().unwrap());
        assert!(p.vertices().unwrap().is_empty());
    }

    #[test]
    fn empty_polytope_is_flagged() {
        let p = Polytope {
            dim: 1,
            c: vec![vec![1.0], vec![-1.0]],
            d: vec![-1.0, -1.0], // z <= -1 and z >= 1
        };
        assert!(!p.is_nonempty().unwrap());
    }

    #[test]
    fn validation_rejects_outside_samples() {
        let mut p = riding_problem(4);
        p.weierstrass_samples = PerNode::Constant(vec![vec![2.0]]);
        assert!(matches!(p.validate(1e-7), Err(ModelError::Invalid(_))));
    }

    #[test]
    fn validation_rejects_unbounded_control_sets() {
        let mut p = riding_problem(4);
        p.control_set = PerNode::Constant(Polytope {
            dim: 1,
            c: vec![vec![1.0]],
            d: vec![1.0],
        });
        p.weierstrass_samples = PerNode::Constant(vec![vec![0.0]]);
        assert!(matches!(p.validate(1e-7), Err(ModelError::Invalid(_))));
    }
}
