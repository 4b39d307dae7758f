//! Self-contained dense linear programming with auditable certificates.
//!
//! The engine solves
//!
//! ```text
//!     minimize    c · x
//!     subject to  a_i · x  {<=, =, >=}  b_i      (rows)
//!                 l_j <= x_j <= u_j               (optional per-variable bounds)
//! ```
//!
//! by a two-phase dense simplex method and reports one of three outcomes:
//!
//! * [`LpOutcome::Optimal`] — a primal vector, its objective value, and one
//!   dual multiplier per row (`<=` rows get nonpositive duals, `>=` rows
//!   nonnegative, `=` rows unrestricted, for a minimization),
//! * [`LpOutcome::Infeasible`] — a [`FarkasCertificate`] proving that no
//!   feasible point exists; every certificate returned by [`solve_lp`] has
//!   already passed [`verify_farkas`],
//! * [`LpOutcome::Unbounded`] — a feasible direction along which the
//!   objective decreases without bound.
//!
//! Certificates are the point of this module: downstream code treats an
//! infeasibility verdict as evidence only because the aggregated-inequality
//! contradiction can be rechecked independently in one pass, with no trust in
//! the pivoting that produced it.

mod tableau;

use tableau::{PricingRule, StepOutcome, Tableau};

/// Constraint sense of one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// One linear constraint `coeffs · x (relation) rhs`.
#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program in the mixed-row form documented on the module.
#[derive(Debug, Clone)]
pub struct LpProblem {
    /// Objective coefficients; the engine always minimizes.
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    /// `(lower, upper)` per variable; `None` means unbounded on that side.
    pub bounds: Vec<(Option<f64>, Option<f64>)>,
}

impl LpProblem {
    /// New problem minimizing `objective`, no rows, all variables free.
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            rows: Vec::new(),
            bounds: vec![(None, None); n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.rows.push(LpRow {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) {
        self.bounds[var] = (lower, upper);
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.bounds.len() != n {
            return Err(LpError::Malformed(format!(
                "bounds length {} does not match {} variables",
                self.bounds.len(),
                n
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {} has {} coefficients, expected {}",
                    i,
                    row.coeffs.len(),
                    n
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::Malformed(format!("row {i} has non-finite data")));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite())
            || self
                .bounds
                .iter()
                .flat_map(|(l, u)| l.iter().chain(u.iter()))
                .any(|v| !v.is_finite())
        {
            return Err(LpError::Malformed("non-finite objective or bound".into()));
        }
        Ok(())
    }
}

/// Solver configuration. The defaults match the engine-wide tolerances.
#[derive(Debug, Clone)]
pub struct LpSettings {
    /// Feasibility/optimality tolerance (reduced costs, ratio-test pivots,
    /// phase-1 residual). Defaults to `1e-9`.
    pub tol: f64,
    /// Pivot budget; `None` picks `10_000 + 50 * (rows + columns)`.
    pub max_iterations: Option<usize>,
    /// Use pure Bland pricing instead of Dantzig-with-Bland-fallback.
    pub bland_only: bool,
}

impl Default for LpSettings {
    fn default() -> Self {
        LpSettings {
            tol: 1e-9,
            max_iterations: None,
            bland_only: false,
        }
    }
}

/// Proof of infeasibility by aggregation of constraint residuals.
///
/// For any point `x` satisfying all constraints, each of the residuals
///
/// ```text
///     rho_i(x) = b_i - a_i·x   (<= rows)        x_j - l_j   (lower bounds)
///     rho_i(x) = a_i·x - b_i   (>= and = rows)  u_j - x_j   (upper bounds)
/// ```
///
/// is nonnegative (`=` rows have residual zero). The certificate supplies
/// weights — nonnegative everywhere except on `=` rows, where any sign is
/// allowed — such that the weighted sum of residuals is identically a
/// *negative constant*: the variable terms cancel and the constant term is
/// `<= -tol`. No feasible point can exist, since the same sum would have to
/// be nonnegative. [`verify_farkas`] checks exactly this in one pass.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FarkasCertificate {
    /// One weight per row, in row order.
    pub row_weights: Vec<f64>,
    /// One weight per variable for its lower-bound residual (zero where the
    /// variable has no lower bound).
    pub lower_weights: Vec<f64>,
    /// One weight per variable for its upper-bound residual.
    pub upper_weights: Vec<f64>,
}

/// Result of [`solve_lp`].
#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal {
        x: Vec<f64>,
        value: f64,
        /// One dual per row; see the module docs for the sign convention.
        duals: Vec<f64>,
    },
    Infeasible {
        certificate: FarkasCertificate,
    },
    Unbounded {
        /// Feasible direction with `c · ray < 0`.
        ray: Vec<f64>,
    },
}

/// Errors from the solver and the certificate checker.
#[derive(Debug, Clone)]
pub enum LpError {
    /// Dimension mismatches or non-finite input data.
    Malformed(String),
    /// The pivot budget was exhausted before a conclusion.
    IterationLimit(usize),
    /// The solver reached a state it could not certify (failed internal
    /// audit of a certificate, ray, or final feasibility).
    Numerical(String),
}

impl std::fmt::Display for LpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LpError::Malformed(msg) => write!(f, "malformed linear program: {msg}"),
            LpError::IterationLimit(n) => {
                write!(f, "simplex iteration limit reached after {n} pivots")
            }
            LpError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for LpError {}

// ---------------------------------------------------------------------------
// Internal standard form
// ---------------------------------------------------------------------------

/// How a user variable is represented by nonnegative internal columns.
#[derive(Debug, Clone, Copy)]
enum VarRep {
    /// `lower == upper`: substituted as a constant.
    Fixed(f64),
    /// `x = lo + y`, `y >= 0` (lower bound present; a cap row bounds `y`
    /// when an upper bound exists too).
    Shifted { col: usize, lo: f64 },
    /// `x = hi - y`, `y >= 0` (upper bound only).
    NegShifted { col: usize, hi: f64 },
    /// Free variable split `x = y⁺ - y⁻`.
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy)]
enum RowOrigin {
    /// User row index.
    User(usize),
    /// Cap row `y_j <= hi_j - lo_j` for a doubly bounded variable `j`.
    UpperCap(usize),
}

struct StdRow {
    coeffs: Vec<f64>, // over structural columns
    rhs: f64,
    relation: Relation,
    origin: RowOrigin,
}

struct StdForm {
    var_reps: Vec<VarRep>,
    nstruct: usize,
    rows: Vec<StdRow>,
}

fn build_std_form(lp: &LpProblem) -> Result<StdForm, StdFormShortCircuit> {
    let n = lp.n_vars();
    let mut var_reps = Vec::with_capacity(n);
    let mut nstruct = 0usize;
    let mut caps: Vec<(usize, f64)> = Vec::new(); // (var, hi - lo)
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let rep = match (lo, hi) {
            (Some(l), Some(u)) => {
                if l > u {
                    return Err(StdFormShortCircuit::EmptyBound(j));
                }
                if l == u {
                    VarRep::Fixed(l)
                } else {
                    caps.push((j, u - l));
                    let col = nstruct;
                    nstruct += 1;
                    VarRep::Shifted { col, lo: l }
                }
            }
            (Some(l), None) => {
                let col = nstruct;
                nstruct += 1;
                VarRep::Shifted { col, lo: l }
            }
            (None, Some(u)) => {
                let col = nstruct;
                nstruct += 1;
                VarRep::NegShifted { col, hi: u }
            }
            (None, None) => {
                let pos = nstruct;
                let neg = nstruct + 1;
                nstruct += 2;
                VarRep::Split { pos, neg }
            }
        };
        var_reps.push(rep);
    }

    let mut rows = Vec::with_capacity(lp.rows.len() + caps.len());
    for (i, row) in lp.rows.iter().enumerate() {
        let mut coeffs = vec![0.0; nstruct];
        let mut rhs = row.rhs;
        for (j, &a) in row.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match var_reps[j] {
                VarRep::Fixed(v) => rhs -= a * v,
                VarRep::Shifted { col, lo } => {
                    coeffs[col] += a;
                    rhs -= a * lo;
                }
                VarRep::NegShifted { col, hi } => {
                    coeffs[col] -= a;
                    rhs -= a * hi;
                }
                VarRep::Split { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push(StdRow {
            coeffs,
            rhs,
            relation: row.relation,
            origin: RowOrigin::User(i),
        });
    }
    for &(j, width) in &caps {
        let col = match var_reps[j] {
            VarRep::Shifted { col, .. } => col,
            _ => unreachable!(),
        };
        let mut coeffs = vec![0.0; nstruct];
        coeffs[col] = 1.0;
        rows.push(StdRow {
            coeffs,
            rhs: width,
            relation: Relation::Le,
            origin: RowOrigin::UpperCap(j),
        });
    }

    Ok(StdForm {
        var_reps,
        nstruct,
        rows,
    })
}

enum StdFormShortCircuit {
    /// Variable whose bounds satisfy `lower > upper`.
    EmptyBound(usize),
}

// ---------------------------------------------------------------------------
// Solve driver
// ---------------------------------------------------------------------------

/// Solves the linear program. See the module documentation for the outcome
/// contract; infeasibility certificates are verified before being returned.
pub fn solve_lp(lp: &LpProblem, settings: &LpSettings) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let tol = settings.tol;

    let std = match build_std_form(lp) {
        Ok(s) => s,
        Err(StdFormShortCircuit::EmptyBound(j)) => {
            // lower > upper: the two bound residuals already contradict.
            let n = lp.n_vars();
            let mut cert = FarkasCertificate {
                row_weights: vec![0.0; lp.rows.len()],
                lower_weights: vec![0.0; n],
                upper_weights: vec![0.0; n],
            };
            cert.lower_weights[j] = 1.0;
            cert.upper_weights[j] = 1.0;
            return finish_infeasible(lp, cert, tol);
        }
    };

    let m = std.rows.len();
    // Column layout: structural, then one slack per inequality row, then one
    // artificial per row that cannot start on its slack.
    let nslack = std
        .rows
        .iter()
        .filter(|r| r.relation != Relation::Eq)
        .count();
    // Which rows get artificials is known only after rhs sign normalization;
    // allocate pessimistically and trim.
    let mut slack_col_of_row = vec![usize::MAX; m];
    {
        let mut next = std.nstruct;
        for (r, row) in std.rows.iter().enumerate() {
            if row.relation != Relation::Eq {
                slack_col_of_row[r] = next;
                next += 1;
            }
        }
    }
    let first_artificial = std.nstruct + nslack;
    let mut sigma = vec![1.0f64; m];
    let mut needs_artificial = vec![false; m];
    for (r, row) in std.rows.iter().enumerate() {
        if row.rhs < 0.0 {
            sigma[r] = -1.0;
        }
        // Post-flip slack coefficient: Le => +sigma, Ge => -sigma.
        let slack_coeff = match row.relation {
            Relation::Le => sigma[r],
            Relation::Ge => -sigma[r],
            Relation::Eq => 0.0,
        };
        needs_artificial[r] = slack_coeff != 1.0;
    }
    let nartificial = needs_artificial.iter().filter(|&&b| b).count();
    let ncols = first_artificial + nartificial;

    let max_iterations = settings.max_iterations.unwrap_or(10_000 + 50 * (m + ncols));
    let pricing = if settings.bland_only {
        PricingRule::Bland
    } else {
        PricingRule::DantzigThenBland
    };
    let mut tab = Tableau::new(m, ncols, tol, pricing, max_iterations);

    let mut rhs_scale = 1.0f64;
    {
        let mut next_artificial = first_artificial;
        for (r, row) in std.rows.iter().enumerate() {
            let s = sigma[r];
            for (c, &a) in row.coeffs.iter().enumerate() {
                if a != 0.0 {
                    tab.set(r, c, s * a);
                }
            }
            match row.relation {
                Relation::Le => tab.set(r, slack_col_of_row[r], s),
                Relation::Ge => tab.set(r, slack_col_of_row[r], -s),
                Relation::Eq => {}
            }
            let b = s * row.rhs;
            tab.set_rhs(r, b);
            rhs_scale = rhs_scale.max(b.abs());
            let init = if needs_artificial[r] {
                let col = next_artificial;
                next_artificial += 1;
                tab.is_artificial[col] = true;
                tab.set(r, col, 1.0);
                col
            } else {
                slack_col_of_row[r]
            };
            tab.init_col[r] = init;
            tab.install_basis(r, init);
        }
    }

    // Internal objective over structural columns (constant offset recovered
    // later by evaluating c·x on the reconstructed primal point).
    let mut phase2_costs = vec![0.0; ncols];
    for (j, &cj) in lp.objective.iter().enumerate() {
        if cj == 0.0 {
            continue;
        }
        match std.var_reps[j] {
            VarRep::Fixed(_) => {}
            VarRep::Shifted { col, .. } => phase2_costs[col] += cj,
            VarRep::NegShifted { col, .. } => phase2_costs[col] -= cj,
            VarRep::Split { pos, neg } => {
                phase2_costs[pos] += cj;
                phase2_costs[neg] -= cj;
            }
        }
    }
    let mut phase1_costs = vec![0.0; ncols];
    for c in first_artificial..ncols {
        phase1_costs[c] = 1.0;
    }
    tab.price_out_initial_basis(&phase1_costs, &phase2_costs);

    // ---- Phase 1 -----------------------------------------------------
    match tab.optimize(true, tol) {
        StepOutcome::Optimal => {}
        StepOutcome::Unbounded(_) => {
            return Err(LpError::Numerical(
                "phase-1 objective reported unbounded".into(),
            ))
        }
        StepOutcome::IterationLimit => return Err(LpError::IterationLimit(tab.iterations)),
    }
    let z1 = tab.objective(true);
    if z1 > tol * (1.0 + rhs_scale) {
        let cert = extract_farkas(lp, &std, &sigma, &tab, tol)?;
        return finish_infeasible(lp, cert, tol);
    }
    tab.purge_artificials();

    // ---- Phase 2 -----------------------------------------------------
    match tab.optimize(false, tol) {
        StepOutcome::Optimal => {}
        StepOutcome::Unbounded(col) => {
            let ray = extract_ray(lp, &std, &tab, col, tol)?;
            return Ok(LpOutcome::Unbounded { ray });
        }
        StepOutcome::IterationLimit => return Err(LpError::IterationLimit(tab.iterations)),
    }

    // Recover the user primal point.
    let x: Vec<f64> = std
        .var_reps
        .iter()
        .map(|rep| match *rep {
            VarRep::Fixed(v) => v,
            VarRep::Shifted { col, lo } => lo + tab.column_value(col),
            VarRep::NegShifted { col, hi } => hi - tab.column_value(col),
            VarRep::Split { pos, neg } => tab.column_value(pos) - tab.column_value(neg),
        })
        .collect();
    audit_primal(lp, &x, tol)?;
    let value: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    // Row duals: y_r = -rc(init_col_r) in phase 2 (init columns cost zero),
    // mapped through the rhs sign normalization; cap rows carry no user row.
    let y = tab.row_duals(false, |_| 0.0);
    let mut duals = vec![0.0; lp.rows.len()];
    for (r, row) in std.rows.iter().enumerate() {
        if let RowOrigin::User(i) = row.origin {
            duals[i] = sigma[r] * y[r];
        }
    }

    Ok(LpOutcome::Optimal { x, value, duals })
}

/// Verifies and wraps an infeasibility certificate.
fn finish_infeasible(
    lp: &LpProblem,
    certificate: FarkasCertificate,
    tol: f64,
) -> Result<LpOutcome, LpError> {
    if verify_farkas(lp, &certificate, tol)? {
        Ok(LpOutcome::Infeasible { certificate })
    } else {
        Err(LpError::Numerical(
            "derived infeasibility certificate failed verification".into(),
        ))
    }
}

/// Builds the user-level Farkas certificate from the phase-1 duals.
fn extract_farkas(
    lp: &LpProblem,
    std: &StdForm,
    sigma: &[f64],
    tab: &Tableau,
    tol: f64,
) -> Result<FarkasCertificate, LpError> {
    let y = tab.row_duals(true, |r| {
        if tab.is_artificial[tab.init_col[r]] {
            1.0
        } else {
            0.0
        }
    });
    let n = lp.n_vars();
    let mut row_weights = vec![0.0; lp.rows.len()];
    let mut lower_weights = vec![0.0; n];
    let mut upper_weights = vec![0.0; n];

    for (r, row) in std.rows.iter().enumerate() {
        let sy = sigma[r] * y[r];
        match row.origin {
            RowOrigin::User(i) => {
                // Residual weights: <= rows use b - a·x, so their aggregate
                // coefficient is -(sigma y); >= and = rows use a·x - b.
                row_weights[i] = match lp.rows[i].relation {
                    Relation::Le => -sy,
                    Relation::Ge | Relation::Eq => sy,
                };
            }
            RowOrigin::UpperCap(j) => {
                // The cap row is the upper-bound residual of variable j.
                upper_weights[j] += -sy;
            }
        }
    }
    // Clamp sign-law roundoff on inequality rows.
    for (i, row) in lp.rows.iter().enumerate() {
        if row.relation != Relation::Eq && row_weights[i] < 0.0 {
            if row_weights[i]
                < -1e-7 * (1.0 + row_weights.iter().fold(0.0f64, |m, w| m.max(w.abs())))
            {
                return Err(LpError::Numerical(format!(
                    "phase-1 dual has wrong sign on row {i}"
                )));
            }
            row_weights[i] = 0.0;
        }
    }
    for w in upper_weights.iter_mut() {
        if *w < 0.0 {
            *w = 0.0;
        }
    }

    // Residual x-coefficients of the aggregate so far; kill them with bound
    // residuals (their existence is guaranteed by phase-1 dual feasibility).
    let g = aggregate_coefficients(lp, &row_weights, &lower_weights, &upper_weights);
    let gscale = 1.0 + g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for j in 0..n {
        if g[j].abs() <= tol * gscale {
            continue;
        }
        if g[j] > 0.0 {
            if lp.bounds[j].1.is_none() {
                return Err(LpError::Numerical(format!(
                    "certificate residual needs a missing upper bound on variable {j}"
                )));
            }
            upper_weights[j] += g[j];
        } else {
            if lp.bounds[j].0.is_none() {
                return Err(LpError::Numerical(format!(
                    "certificate residual needs a missing lower bound on variable {j}"
                )));
            }
            lower_weights[j] += -g[j];
        }
    }

    Ok(FarkasCertificate {
        row_weights,
        lower_weights,
        upper_weights,
    })
}

/// x-coefficient vector of the weighted residual sum.
fn aggregate_coefficients(
    lp: &LpProblem,
    row_weights: &[f64],
    lower_weights: &[f64],
    upper_weights: &[f64],
) -> Vec<f64> {
    let n = lp.n_vars();
    let mut g = vec![0.0; n];
    for (i, row) in lp.rows.iter().enumerate() {
        let w = row_weights[i];
        if w == 0.0 {
            continue;
        }
        let s = match row.relation {
            Relation::Le => -w,
            Relation::Ge | Relation::Eq => w,
        };
        for (j, &a) in row.coeffs.iter().enumerate() {
            g[j] += s * a;
        }
    }
    for j in 0..n {
        g[j] += lower_weights[j] - upper_weights[j];
    }
    g
}

/// Constant term of the weighted residual sum.
fn aggregate_constant(
    lp: &LpProblem,
    row_weights: &[f64],
    lower_weights: &[f64],
    upper_weights: &[f64],
) -> f64 {
    let mut c0 = 0.0;
    for (i, row) in lp.rows.iter().enumerate() {
        let w = row_weights[i];
        if w == 0.0 {
            continue;
        }
        c0 += match row.relation {
            Relation::Le => w * row.rhs,
            Relation::Ge | Relation::Eq => -w * row.rhs,
        };
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if lower_weights[j] != 0.0 {
            c0 -= lower_weights[j] * lo.unwrap_or(0.0);
        }
        if upper_weights[j] != 0.0 {
            c0 += upper_weights[j] * hi.unwrap_or(0.0);
        }
    }
    c0
}

/// Independently checks a Farkas certificate against the problem data.
///
/// Returns `Ok(true)` when the weighted residual sum (see
/// [`FarkasCertificate`]) has vanishing variable coefficients, legal weight
/// signs (weights on `<=`/`>=` rows and on bounds must be nonnegative, and a
/// bound weight may only touch a bound that exists), and a constant term
/// below `-tol` — the contradiction `0 <= c` with `c < -tol`.
pub fn verify_farkas(lp: &LpProblem, cert: &FarkasCertificate, tol: f64) -> Result<bool, LpError> {
    lp.validate()?;
    let n = lp.n_vars();
    if cert.row_weights.len() != lp.rows.len()
        || cert.lower_weights.len() != n
        || cert.upper_weights.len() != n
    {
        return Err(LpError::Malformed(
            "certificate dimensions do not match the problem".into(),
        ));
    }
    let mut scale = 1.0f64;
    for (i, row) in lp.rows.iter().enumerate() {
        let w = cert.row_weights[i];
        if row.relation != Relation::Eq && w < -tol {
            return Ok(false);
        }
        scale = scale.max(w.abs() * (1.0 + row.rhs.abs()));
    }
    for j in 0..n {
        let (lo, hi) = lp.bounds[j];
        let (wl, wu) = (cert.lower_weights[j], cert.upper_weights[j]);
        if wl < -tol || wu < -tol {
            return Ok(false);
        }
        if (lo.is_none() && wl.abs() > tol) || (hi.is_none() && wu.abs() > tol) {
            return Ok(false);
        }
        scale = scale.max(wl.abs() * (1.0 + lo.unwrap_or(0.0).abs()));
        scale = scale.max(wu.abs() * (1.0 + hi.unwrap_or(0.0).abs()));
    }
    let g = aggregate_coefficients(
        lp,
        &cert.row_weights,
        &cert.lower_weights,
        &cert.upper_weights,
    );
    if g.iter().any(|v| v.abs() > tol * scale) {
        return Ok(false);
    }
    let c0 = aggregate_constant(
        lp,
        &cert.row_weights,
        &cert.lower_weights,
        &cert.upper_weights,
    );
    Ok(c0 < -tol)
}

/// Audits a recovered primal point against the user constraints.
fn audit_primal(lp: &LpProblem, x: &[f64], tol: f64) -> Result<(), LpError> {
    let loose = 1e3 * tol;
    for (i, row) in lp.rows.iter().enumerate() {
        let ax: f64 = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        let scale = 1.0 + row.rhs.abs() + row.coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let viol = match row.relation {
            Relation::Le => ax - row.rhs,
            Relation::Ge => row.rhs - ax,
            Relation::Eq => (ax - row.rhs).abs(),
        };
        if viol > loose * scale {
            return Err(LpError::Numerical(format!(
                "optimal point violates row {i} by {viol:.3e}"
            )));
        }
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let scale = 1.0 + x[j].abs();
        if let Some(l) = lo {
            if l - x[j] > loose * scale {
                return Err(LpError::Numerical(format!(
                    "optimal point violates lower bound of variable {j}"
                )));
            }
        }
        if let Some(u) = hi {
            if x[j] - u > loose * scale {
                return Err(LpError::Numerical(format!(
                    "optimal point violates upper bound of variable {j}"
                )));
            }
        }
    }
    Ok(())
}

/// Maps an unbounded tableau direction back to user variables and audits it.
fn extract_ray(
    lp: &LpProblem,
    std: &StdForm,
    tab: &Tableau,
    entering: usize,
    tol: f64,
) -> Result<Vec<f64>, LpError> {
    let mut struct_dir = vec![0.0; std.nstruct];
    for (col, rate) in tab.ray(entering) {
        if col < std.nstruct {
            struct_dir[col] += rate;
        }
        // Slack/artificial components have no user-variable image.
    }
    let ray: Vec<f64> = std
        .var_reps
        .iter()
        .map(|rep| match *rep {
            VarRep::Fixed(_) => 0.0,
            VarRep::Shifted { col, .. } => struct_dir[col],
            VarRep::NegShifted { col, .. } => -struct_dir[col],
            VarRep::Split { pos, neg } => struct_dir[pos] - struct_dir[neg],
        })
        .collect();

    // Audit: direction must preserve feasibility and strictly improve.
    let rscale = 1.0 + ray.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let loose = 1e3 * tol * rscale;
    for (i, row) in lp.rows.iter().enumerate() {
        let ar: f64 = row.coeffs.iter().zip(&ray).map(|(a, v)| a * v).sum();
        let ok = match row.relation {
            Relation::Le => ar <= loose,
            Relation::Ge => ar >= -loose,
            Relation::Eq => ar.abs() <= loose,
        };
        if !ok {
            return Err(LpError::Numerical(format!(
                "unbounded direction violates row {i}"
            )));
        }
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if lo.is_some() && ray[j] < -loose {
            return Err(LpError::Numerical(
                "unbounded direction exits a lower bound".into(),
            ));
        }
        if hi.is_some() && ray[j] > loose {
            return Err(LpError::Numerical(
                "unbounded direction exits an upper bound".into(),
            ));
        }
    }
    let descent: f64 = lp.objective.iter().zip(&ray).map(|(c, v)| c * v).sum();
    if descent >= -tol {
        return Err(LpError::Numerical(
            "claimed unbounded direction does not descend".into(),
        ));
    }
    Ok(ray)
}
