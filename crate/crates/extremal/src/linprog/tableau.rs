//! Dense simplex tableau engine.
//!
//! This is the numerical workhorse behind [`super::solve_lp`]. It operates on
//! a fully materialized row-major tableau holding the constraint rows plus two
//! cost rows (phase 2 and phase 1) that are updated by the same rank-one
//! pivots as the constraints, so reduced costs are always read directly off
//! the tableau. The initial basis is the identity formed by slack columns
//! (where their sign permits) and artificial columns, which doubles as the
//! bookkeeping needed to read row duals back out: the cost-row entries under
//! the initial identity columns are exactly `c_init - y`.
//!
//! Pivot selection uses Dantzig pricing by default and switches permanently
//! to Bland's rule after a long degenerate streak, which keeps the engine fast
//! on the block-banded problems the certifier produces while still
//! guaranteeing termination. Rows whose pivot-column entry is exactly zero are
//! skipped during the rank-one update; on banded inputs most rows are skipped,
//! which is what makes desk-scale dense pivoting viable.

/// Outcome of driving one phase to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StepOutcome {
    /// No entering column prices favorably: current basis is optimal.
    Optimal,
    /// The contained column improves the objective without a blocking row.
    Unbounded(usize),
    /// The pivot budget ran out before either conclusion.
    IterationLimit,
}

/// Which rule picks the entering column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PricingRule {
    /// Most negative reduced cost, lowest column index on ties. Switches to
    /// Bland automatically after `DEGENERATE_STREAK_LIMIT` non-improving
    /// pivots in a row.
    DantzigThenBland,
    /// Lowest-index column with negative reduced cost (anti-cycling).
    Bland,
}

/// Consecutive non-improving pivots tolerated before Dantzig pricing hands
/// over to Bland's rule for the rest of the solve.
const DEGENERATE_STREAK_LIMIT: usize = 500;

pub(crate) struct Tableau {
    /// Number of constraint rows.
    pub m: usize,
    /// Columns excluding the right-hand side.
    pub ncols: usize,
    /// Row stride: `ncols + 1`, the trailing entry being the rhs.
    width: usize,
    /// `(m + 2) * width` entries: constraint rows, then the phase-2 cost row,
    /// then the phase-1 cost row. Cost rows store reduced costs; their rhs
    /// cell stores minus the objective value.
    data: Vec<f64>,
    /// Basic column per constraint row.
    pub basis: Vec<usize>,
    /// Marks artificial columns (barred from entering the basis).
    pub is_artificial: Vec<bool>,
    /// Initial identity column of each row (slack or artificial).
    pub init_col: Vec<usize>,
    /// Rows found redundant during artificial cleanup; zeroed and inert.
    pub redundant: Vec<bool>,
    /// Smallest pivot magnitude accepted by the ratio test.
    pub pivot_tol: f64,
    pricing: PricingRule,
    degenerate_streak: usize,
    pub iterations: usize,
    pub max_iterations: usize,
}

const PHASE2_ROW: usize = 0; // offset from m
const PHASE1_ROW: usize = 1;

impl Tableau {
    /// Builds a tableau for `m` rows and `ncols` columns, all entries zero.
    pub fn new(
        m: usize,
        ncols: usize,
        pivot_tol: f64,
        pricing: PricingRule,
        max_iterations: usize,
    ) -> Self {
        let width = ncols + 1;
        Tableau {
            m,
            ncols,
            width,
            data: vec![0.0; (m + 2) * width],
            basis: vec![usize::MAX; m],
            is_artificial: vec![false; ncols],
            init_col: vec![usize::MAX; m],
            redundant: vec![false; m],
            pivot_tol,
            pricing,
            degenerate_streak: 0,
            iterations: 0,
            max_iterations,
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    #[inline]
    pub fn rhs(&self, row: usize) -> f64 {
        self.at(row, self.ncols)
    }

    pub fn set_rhs(&mut self, row: usize, v: f64) {
        let c = self.ncols;
        self.set(row, c, v);
    }

    fn cost_row_index(&self, phase1: bool) -> usize {
        self.m + if phase1 { PHASE1_ROW } else { PHASE2_ROW }
    }

    pub fn reduced_cost(&self, col: usize, phase1: bool) -> f64 {
        self.at(self.cost_row_index(phase1), col)
    }

    /// Objective value of the requested phase (cost rows store its negation).
    pub fn objective(&self, phase1: bool) -> f64 {
        -self.at(self.cost_row_index(phase1), self.ncols)
    }

    /// Installs `col` as the basic column of `row` without arithmetic.
    /// The caller must have written an identity column there.
    pub fn install_basis(&mut self, row: usize, col: usize) {
        self.basis[row] = col;
    }

    /// Subtracts `factor * row_r` from every cost row entry so that basic
    /// columns get zero reduced cost. Called once after the initial basis is
    /// written.
    pub fn price_out_initial_basis(&mut self, phase1_costs: &[f64], phase2_costs: &[f64]) {
        debug_assert_eq!(phase1_costs.len(), self.ncols);
        debug_assert_eq!(phase2_costs.len(), self.ncols);
        // Write the raw cost rows first.
        for c in 0..self.ncols {
            let (m, w) = (self.m, self.width);
            self.data[(m + PHASE2_ROW) * w + c] = phase2_costs[c];
            self.data[(m + PHASE1_ROW) * w + c] = phase1_costs[c];
        }
        let (m, w) = (self.m, self.width);
        self.data[(m + PHASE2_ROW) * w + self.ncols] = 0.0;
        self.data[(m + PHASE1_ROW) * w + self.ncols] = 0.0;
        for r in 0..self.m {
            let b = self.basis[r];
            for cost_row in [m + PHASE2_ROW, m + PHASE1_ROW] {
                let cb = self.data[cost_row * w + b];
                if cb != 0.0 {
                    let (row_r, row_c) = self.two_rows_mut(r, cost_row);
                    for (dst, src) in row_c.iter_mut().zip(row_r.iter()) {
                        *dst -= cb * *src;
                    }
                    // Kill roundoff on the basic column itself.
                    self.data[cost_row * w + b] = 0.0;
                }
            }
        }
    }

    /// Borrows rows `a` and `b` (a != b) mutably at once.
    fn two_rows_mut(&mut self, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert_ne!(a, b);
        let w = self.width;
        if a < b {
            let (lo, hi) = self.data.split_at_mut(b * w);
            (&mut lo[a * w..a * w + w], &mut hi[..w])
        } else {
            let (lo, hi) = self.data.split_at_mut(a * w);
            (&mut hi[..w], &mut lo[b * w..b * w + w])
        }
    }

    /// Gauss-Jordan pivot on `(row, col)`, updating both cost rows.
    pub fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.data[row * w + col];
        debug_assert!(p.abs() > 0.0, "zero pivot");
        let inv = 1.0 / p;
        {
            let r = &mut self.data[row * w..row * w + w];
            for v in r.iter_mut() {
                *v *= inv;
            }
            r[col] = 1.0;
        }
        for i in 0..self.m + 2 {
            if i == row {
                continue;
            }
            let f = self.data[i * w + col];
            if f == 0.0 {
                continue;
            }
            let (src, dst) = self.two_rows_mut(row, i);
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d -= f * *s;
            }
            dst[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Entering-column choice for the active phase. Returns `None` at
    /// optimality. Artificial columns never enter.
    fn price(&self, phase1: bool, tol: f64) -> Option<usize> {
        let cost_row = self.cost_row_index(phase1);
        let base = cost_row * self.width;
        match self.pricing {
            PricingRule::Bland => {
                (0..self.ncols).find(|&c| !self.is_artificial[c] && self.data[base + c] < -tol)
            }
            PricingRule::DantzigThenBland => {
                let mut best: Option<(usize, f64)> = None;
                for c in 0..self.ncols {
                    if self.is_artificial[c] {
                        continue;
                    }
                    let rc = self.data[base + c];
                    if rc < -tol && best.map_or(true, |(_, b)| rc < b) {
                        best = Some((c, rc));
                    }
                }
                best.map(|(c, _)| c)
            }
        }
    }

    /// Ratio test with Bland tie-breaking. Rows whose basic variable is an
    /// artificial pinned at zero are forced out first (any nonzero entry
    /// qualifies at ratio zero), which keeps artificials from drifting
    /// positive once phase 1 has finished.
    fn select_leaving(&self, entering: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None; // (row, ratio)
        for r in 0..self.m {
            if self.redundant[r] {
                continue;
            }
            let a = self.at(r, entering);
            let zero_artificial =
                self.is_artificial[self.basis[r]] && self.rhs(r).abs() <= self.pivot_tol;
            let ratio = if zero_artificial && a.abs() > self.pivot_tol {
                0.0
            } else if a > self.pivot_tol {
                self.rhs(r) / a
            } else {
                continue;
            };
            match best {
                None => best = Some((r, ratio)),
                Some((br, bratio)) => {
                    if ratio < bratio - 0.0 || (ratio == bratio && self.basis[r] < self.basis[br]) {
                        best = Some((r, ratio));
                    }
                }
            }
        }
        best.map(|(r, _)| r)
    }

    /// Runs the simplex loop on the requested phase's cost row.
    pub fn optimize(&mut self, phase1: bool, tol: f64) -> StepOutcome {
        loop {
            if self.iterations >= self.max_iterations {
                return StepOutcome::IterationLimit;
            }
            let Some(entering) = self.price(phase1, tol) else {
                return StepOutcome::Optimal;
            };
            let Some(leaving) = self.select_leaving(entering) else {
                return StepOutcome::Unbounded(entering);
            };
            let before = self.objective(phase1);
            self.pivot(leaving, entering);
            self.iterations += 1;
            if self.pricing == PricingRule::DantzigThenBland {
                let improved = self.objective(phase1) < before - 1e-13 * (1.0 + before.abs());
                if improved {
                    self.degenerate_streak = 0;
                } else {
                    self.degenerate_streak += 1;
                    if self.degenerate_streak > DEGENERATE_STREAK_LIMIT {
                        self.pricing = PricingRule::Bland;
                    }
                }
            }
        }
    }

    /// After a feasible phase 1, pivots surviving artificials out of the
    /// basis (degenerate pivots) or marks their rows redundant and inert.
    pub fn purge_artificials(&mut self) {
        for r in 0..self.m {
            if self.redundant[r] || !self.is_artificial[self.basis[r]] {
                continue;
            }
            let mut replacement = None;
            for c in 0..self.ncols {
                if !self.is_artificial[c] && self.at(r, c).abs() > self.pivot_tol {
                    replacement = Some(c);
                    break;
                }
            }
            match replacement {
                Some(c) => self.pivot(r, c),
                None => {
                    // Row is a linear combination of the others: neutralize it.
                    self.redundant[r] = true;
                    let w = self.width;
                    for v in &mut self.data[r * w..r * w + w] {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    /// Row duals of the requested phase: `y_r = c_init_r - rc(init_col_r)`.
    pub fn row_duals(&self, phase1: bool, init_cost: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..self.m)
            .map(|r| {
                if self.redundant[r] {
                    0.0
                } else {
                    init_cost(r) - self.reduced_cost(self.init_col[r], phase1)
                }
            })
            .collect()
    }

    /// Current value of column `col` in the basic solution.
    pub fn column_value(&self, col: usize) -> f64 {
        for r in 0..self.m {
            if self.basis[r] == col {
                return self.rhs(r);
            }
        }
        0.0
    }

    /// The basic-direction ray associated with an entering column that passed
    /// no ratio test: entering moves at rate 1, each basic variable at rate
    /// `-tableau[r][entering]`.
    pub fn ray(&self, entering: usize) -> Vec<(usize, f64)> {
        let mut dir = vec![(entering, 1.0)];
        for r in 0..self.m {
            if self.redundant[r] {
                continue;
            }
            let a = self.at(r, entering);
            if a != 0.0 {
                dir.push((self.basis[r], -a));
            }
        }
        dir
    }
}
