//! Assembly of the discrete multiplier system as a linear program.
//!
//! One feasibility program per normalization mode, over the variables
//!
//! * `p_k = pp_k - pm_k` (adjoint arc, split into nonnegative parts so the
//!   l1 norm is linear in the objective),
//! * `w_{k,g} >= 0` — weight of state-constraint gradient generator `g` at
//!   node `k`; the measure atom is `mu_k = sum_g w_{k,g}` and the selection
//!   is `gamma_k mu_k = sum_g w_{k,g} gamma_{k,g}`.  Columns exist only at
//!   nodes where the constraint is active (support condition) and the mode
//!   allows a measure,
//! * `theta_{k,j} >= 0` — running-cost subdifferential weights on interval
//!   `k` with `sum_j theta_{k,j} = lambda0` (the scaled convex hull,
//!   linearized exactly by the weight-sum substitution),
//! * `nu_{k,i} >= 0` — control-set normal-cone weights,
//! * `sigma_s >= 0` — endpoint-set normal-cone weights,
//! * `omega_t >= 0` — endpoint-cost subdifferential weights with
//!   `sum_t omega_t = lambda0`.
//!
//! The cost multiplier `lambda0` is substituted as a constant fixed by the
//! mode (1 for the normal mode, 0 for the abnormal ones), which lets the
//! builder drop the `theta`/`omega` blocks entirely in abnormal modes.  A
//! homogeneous variant keeps `lambda0` as a nonnegative column and omits
//! the normalization row; it is used to probe the full multiplier cone.
//!
//! Row blocks, in order:
//!
//! 1. adjoint rows, interval `k`, state `i` (scaled by the step `dt`):
//!    `p_{k,i} - p_{k+1,i} - dt (fx_k' qt_k)_i + dt sum_j theta_{k,j} xi_{j,i} = 0`
//!    where `qt_k = p_k + sum_{j<=k} gamma_j mu_j`;
//! 2. control stationarity rows, interval `k`, control `j` (dropped in
//!    the classical variant, pruned when identically zero):
//!    `(fu_k' qt_k)_j - sum_t theta_{k,t} zeta_{t,j} - sum_i nu_{k,i} g_{i,j} = 0`;
//! 3. `sum_j theta_{k,j} = lambda0` per interval;
//! 4. maximization rows per interval and sample (deduplicated, trivially
//!    true rows skipped): `qt_k . (f_s - f*) <= lambda0 (L_s - L*)`;
//! 5. transversality: `p_0 = sum sigma_s E_s[first] + sum omega_t l_t[first]`
//!    and `-q_N = sum sigma_s E_s[last] + sum omega_t l_t[last]` with
//!    `q_N = p_N + sum_{j<=N} gamma_j mu_j` (closed atom sum at the right
//!    endpoint);
//! 6. `sum_t omega_t = lambda0`;
//! 7. the mode's normalization row(s), or pin rows fixing a supplied
//!    multiplier set.

use crate::linprog::{LpProblem, Relation};
use crate::model::ExtremalDataTable;
use std::collections::HashSet;

use super::{CertifyError, MultiplierSet, Normalization};

/// How the cost multiplier enters the program.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Lambda0Spec {
    Constant(f64),
    Variable,
}

/// Which system to assemble.
#[derive(Debug, Clone, Copy)]
pub(crate) enum LpVariant<'a> {
    /// Search program for one normalization mode.
    Mode(Normalization),
    /// `lambda0` a nonnegative column, no normalization row: the feasible
    /// set maps onto the homogeneous multiplier cone.
    #[cfg_attr(not(test), allow(dead_code))]
    Homogeneous,
    /// Pin `p`, `mu`, `gamma` to a supplied multiplier set and ask only
    /// whether witness weights (`theta`, `nu`, `sigma`, `omega`) exist.
    Pinned(&'a MultiplierSet),
}

/// Column map of an assembled multiplier program.
#[derive(Debug, Clone)]
pub struct VarLayout {
    pub n: usize,
    pub m: usize,
    pub n_steps: usize,
    /// Start of the nonnegative part of `p_k` (`n` columns each).
    pub pp: Vec<usize>,
    /// Start of the nonpositive part of `p_k` (`n` columns each).
    pub pm: Vec<usize>,
    /// One column per state-constraint gradient generator at node `k`;
    /// empty where the constraint is inactive or the mode forbids atoms.
    pub w: Vec<Vec<usize>>,
    /// Start of the running-cost weight block on interval `k`, if present.
    pub theta: Option<Vec<usize>>,
    /// Start of the normal-cone weight block on interval `k`.
    pub nu: Vec<usize>,
    /// Start of the endpoint-set weight block.
    pub sigma: usize,
    /// Start of the endpoint-cost weight block, if present.
    pub omega: Option<usize>,
    /// Column of `lambda0` when it is a decision variable.
    pub lambda0: Option<usize>,
    pub n_cols: usize,
}

/// A multiplier program together with its column map.
#[derive(Debug, Clone)]
pub struct MultiplierLp {
    pub lp: LpProblem,
    pub layout: VarLayout,
}

/// Builds the search program for one normalization mode.
pub fn build_multiplier_lp(
    table: &ExtremalDataTable,
    mode: Normalization,
) -> Result<MultiplierLp, CertifyError> {
    build_lp(table, LpVariant::Mode(mode), false)
}

pub(crate) fn build_lp(
    table: &ExtremalDataTable,
    variant: LpVariant,
    classical: bool,
) -> Result<MultiplierLp, CertifyError> {
    table.validate()?;
    let n = table.n;
    let m = table.m;
    let n_steps = table.grid.n_steps;
    let dt = table.grid.dt();

    let lambda0 = match variant {
        LpVariant::Mode(mode) => Lambda0Spec::Constant(mode.lambda0()),
        LpVariant::Homogeneous => Lambda0Spec::Variable,
        LpVariant::Pinned(ms) => Lambda0Spec::Constant(ms.lambda0),
    };
    // theta/omega blocks carry a factor of lambda0 through their weight-sum
    // rows; with lambda0 constantly zero they are identically zero and are
    // dropped wholesale.
    let has_cost_weights = !matches!(lambda0, Lambda0Spec::Constant(c) if c == 0.0);
    let mu_forbidden = matches!(
        variant,
        LpVariant::Mode(Normalization::AbnormalAdjoint { .. })
    );

    for k in 0..=n_steps {
        if table.active(k) && table.gamma[k].is_empty() {
            return Err(CertifyError::Structural(format!(
                "state constraint is active at node {k} but the sharp \
                 subdifferential has no generators there"
            )));
        }
    }

    // Column allocation, node-major so coupled blocks stay adjacent.
    let mut n_cols = 0usize;
    let mut alloc = |count: usize| {
        let start = n_cols;
        n_cols += count;
        start
    };
    let mut pp = Vec::with_capacity(n_steps + 1);
    let mut pm = Vec::with_capacity(n_steps + 1);
    let mut w: Vec<Vec<usize>> = Vec::with_capacity(n_steps + 1);
    let mut theta = Vec::with_capacity(n_steps);
    let mut nu = Vec::with_capacity(n_steps);
    for k in 0..=n_steps {
        pp.push(alloc(n));
        pm.push(alloc(n));
        if table.active(k) && !mu_forbidden {
            let start = alloc(table.gamma[k].len());
            w.push((start..start + table.gamma[k].len()).collect());
        } else {
            w.push(Vec::new());
        }
        if k < n_steps {
            if has_cost_weights {
                theta.push(alloc(table.lsub[k].len()));
            }
            if classical {
                nu.push(usize::MAX);
            } else {
                nu.push(alloc(table.ncone[k].len()));
            }
        }
    }
    let sigma = alloc(table.e_ncone.len());
    let omega = has_cost_weights.then(|| alloc(table.l_sub.len()));
    let lambda0_col = match lambda0 {
        Lambda0Spec::Variable => Some(alloc(1)),
        Lambda0Spec::Constant(_) => None,
    };
    let theta = has_cost_weights.then_some(theta);

    // Canonical objective: minimal total variation of the adjoint parts
    // plus minimal measure mass, so reported multipliers are deterministic
    // and as sparse as the system allows.
    let mut objective = vec![0.0; n_cols];
    for k in 0..=n_steps {
        for i in 0..n {
            objective[pp[k] + i] = 1.0;
            objective[pm[k] + i] = 1.0;
        }
        for &col in &w[k] {
            objective[col] = 1.0;
        }
    }
    let mut lp = LpProblem::minimize(objective);
    for col in 0..n_cols {
        lp.set_bounds(col, Some(0.0), None);
    }

    let layout = VarLayout {
        n,
        m,
        n_steps,
        pp,
        pm,
        w,
        theta,
        nu,
        sigma,
        omega,
        lambda0: lambda0_col,
        n_cols,
    };

    // Adds the coefficients of `scale * qt_k . v` for an n-vector `v`,
    // where `qt_k = p_k + sum_{j<=k} gamma_j mu_j` (set `closed_node` to
    // `n_steps` for the closed right-endpoint value `q_N`).
    let add_q_dot = |row: &mut [f64], k: usize, v: &[f64], scale: f64| {
        for (r, &vr) in v.iter().enumerate() {
            let c = scale * vr;
            if c == 0.0 {
                continue;
            }
            row[layout.pp[k] + r] += c;
            row[layout.pm[k] + r] -= c;
        }
        for j in 0..=k {
            if layout.w[j].is_empty() {
                continue;
            }
            for (g, gen) in table.gamma[j].iter().enumerate() {
                let dot: f64 = gen.iter().zip(v).map(|(a, b)| a * b).sum();
                if dot != 0.0 {
                    row[layout.w[j][g]] += scale * dot;
                }
            }
        }
    };

    // 1-2-3: adjoint, control stationarity, and cost-weight-sum rows.
    for k in 0..n_steps {
        for i in 0..n {
            let mut row = vec![0.0; n_cols];
            row[layout.pp[k] + i] += 1.0;
            row[layout.pm[k] + i] -= 1.0;
            row[layout.pp[k + 1] + i] -= 1.0;
            row[layout.pm[k + 1] + i] += 1.0;
            // column i of fx_k' is row i read down the matrix rows
            let fx_col: Vec<f64> = (0..n).map(|r| table.fx[k][r][i]).collect();
            add_q_dot(&mut row, k, &fx_col, -dt);
            if let Some(theta) = &layout.theta {
                for (j, (xi, _)) in table.lsub[k].iter().enumerate() {
                    row[theta[k] + j] += dt * xi[i];
                }
            }
            lp.push_row(row, Relation::Eq, 0.0);
        }
        if !classical {
            for j in 0..m {
                let mut row = vec![0.0; n_cols];
                let fu_col: Vec<f64> = (0..n).map(|r| table.fu[k][r][j]).collect();
                add_q_dot(&mut row, k, &fu_col, 1.0);
                if let Some(theta) = &layout.theta {
                    for (t, (_, zeta)) in table.lsub[k].iter().enumerate() {
                        row[theta[k] + t] -= zeta[j];
                    }
                }
                for (i, gen) in table.ncone[k].iter().enumerate() {
                    row[layout.nu[k] + i] -= gen[j];
                }
                if row.iter().any(|&c| c != 0.0) {
                    lp.push_row(row, Relation::Eq, 0.0);
                }
            }
        }
        if let Some(theta) = &layout.theta {
            let mut row = vec![0.0; n_cols];
            for j in 0..table.lsub[k].len() {
                row[theta[k] + j] = 1.0;
            }
            let rhs = match lambda0 {
                Lambda0Spec::Constant(c) => c,
                Lambda0Spec::Variable => {
                    row[layout.lambda0.unwrap()] = -1.0;
                    0.0
                }
            };
            lp.push_row(row, Relation::Eq, rhs);
        }
    }

    // 4: sampled maximization rows.
    for k in 0..n_steps {
        let (f_star, l_star) = &table.wsamples[k][0];
        let mut seen: HashSet<(Vec<u64>, u64)> = HashSet::new();
        for (fval, lval) in table.wsamples[k].iter().skip(1) {
            let df: Vec<f64> = fval.iter().zip(f_star).map(|(a, b)| a - b).collect();
            let dl = lval - l_star;
            let trivially_true = df.iter().all(|&c| c == 0.0)
                && match lambda0 {
                    Lambda0Spec::Constant(c) => c * dl >= 0.0,
                    Lambda0Spec::Variable => dl >= 0.0,
                };
            if trivially_true {
                continue;
            }
            let key = (
                df.iter().map(|c| c.to_bits()).collect::<Vec<_>>(),
                dl.to_bits(),
            );
            if !seen.insert(key) {
                continue;
            }
            let mut row = vec![0.0; n_cols];
            add_q_dot(&mut row, k, &df, 1.0);
            let rhs = match lambda0 {
                Lambda0Spec::Constant(c) => c * dl,
                Lambda0Spec::Variable => {
                    row[layout.lambda0.unwrap()] = -dl;
                    0.0
                }
            };
            lp.push_row(row, Relation::Le, rhs);
        }
    }

    // 5: transversality at both endpoints.
    for i in 0..n {
        let mut row = vec![0.0; n_cols];
        row[layout.pp[0] + i] += 1.0;
        row[layout.pm[0] + i] -= 1.0;
        for (s, gen) in table.e_ncone.iter().enumerate() {
            row[layout.sigma + s] -= gen[i];
        }
        if let Some(omega) = layout.omega {
            for (t, gen) in table.l_sub.iter().enumerate() {
                row[omega + t] -= gen[i];
            }
        }
        lp.push_row(row, Relation::Eq, 0.0);
    }
    for i in 0..n {
        let mut row = vec![0.0; n_cols];
        row[layout.pp[n_steps] + i] -= 1.0;
        row[layout.pm[n_steps] + i] += 1.0;
        for k in 0..=n_steps {
            if layout.w[k].is_empty() {
                continue;
            }
            for (g, gen) in table.gamma[k].iter().enumerate() {
                if gen[i] != 0.0 {
                    row[layout.w[k][g]] -= gen[i];
                }
            }
        }
        for (s, gen) in table.e_ncone.iter().enumerate() {
            row[layout.sigma + s] -= gen[n + i];
        }
        if let Some(omega) = layout.omega {
            for (t, gen) in table.l_sub.iter().enumerate() {
                row[omega + t] -= gen[n + i];
            }
        }
        lp.push_row(row, Relation::Eq, 0.0);
    }

    // 6: endpoint-cost weight sum.
    if let Some(omega) = layout.omega {
        let mut row = vec![0.0; n_cols];
        for t in 0..table.l_sub.len() {
            row[omega + t] = 1.0;
        }
        let rhs = match lambda0 {
            Lambda0Spec::Constant(c) => c,
            Lambda0Spec::Variable => {
                row[layout.lambda0.unwrap()] = -1.0;
                0.0
            }
        };
        lp.push_row(row, Relation::Eq, rhs);
    }

    // 7: normalization or pin rows.
    match variant {
        LpVariant::Mode(Normalization::Normal) => {}
        LpVariant::Mode(Normalization::AbnormalMeasure) => {
            let mut row = vec![0.0; n_cols];
            for cols in &layout.w {
                for &col in cols {
                    row[col] = 1.0;
                }
            }
            lp.push_row(row, Relation::Eq, 1.0);
        }
        LpVariant::Mode(Normalization::AbnormalAdjoint {
            component,
            positive,
        }) => {
            if component >= n {
                return Err(CertifyError::Structural(format!(
                    "adjoint normalization component {component} out of \
                     range for {n} states"
                )));
            }
            let mut row = vec![0.0; n_cols];
            row[layout.pp[0] + component] = 1.0;
            row[layout.pm[0] + component] = -1.0;
            lp.push_row(row, Relation::Eq, if positive { 1.0 } else { -1.0 });
            for j in 0..n {
                if j == component {
                    continue;
                }
                let mut row = vec![0.0; n_cols];
                row[layout.pp[0] + j] = 1.0;
                row[layout.pm[0] + j] = -1.0;
                lp.push_row(row.clone(), Relation::Le, 1.0);
                lp.push_row(row, Relation::Ge, -1.0);
            }
        }
        LpVariant::Homogeneous => {}
        LpVariant::Pinned(ms) => {
            push_pin_rows(&mut lp, &layout, table, ms)?;
        }
    }

    Ok(MultiplierLp { lp, layout })
}

fn push_pin_rows(
    lp: &mut LpProblem,
    layout: &VarLayout,
    table: &ExtremalDataTable,
    ms: &MultiplierSet,
) -> Result<(), CertifyError> {
    let n = layout.n;
    let n_steps = layout.n_steps;
    if ms.p.len() != n_steps + 1 || ms.mu.len() != n_steps + 1 {
        return Err(CertifyError::Structural(format!(
            "pinned multiplier set has {} adjoint nodes and {} atoms, \
             expected {}",
            ms.p.len(),
            ms.mu.len(),
            n_steps + 1
        )));
    }
    for (k, pk) in ms.p.iter().enumerate() {
        if pk.len() != n {
            return Err(CertifyError::Structural(format!(
                "pinned adjoint at node {k} has dimension {}, expected {n}",
                pk.len()
            )));
        }
        for (i, &value) in pk.iter().enumerate() {
            let mut row = vec![0.0; layout.n_cols];
            row[layout.pp[k] + i] = 1.0;
            row[layout.pm[k] + i] = -1.0;
            lp.push_row(row, Relation::Eq, value);
        }
    }
    for k in 0..=n_steps {
        let mut row = vec![0.0; layout.n_cols];
        for &col in &layout.w[k] {
            row[col] = 1.0;
        }
        lp.push_row(row, Relation::Eq, ms.mu[k]);
        if ms.mu[k] > 0.0 {
            let gamma = ms.gamma[k]
                .as_ref()
                .ok_or(CertifyError::MissingGamma { node: k })?;
            for i in 0..n {
                let mut row = vec![0.0; layout.n_cols];
                for (g, &col) in layout.w[k].iter().enumerate() {
                    row[col] = table.gamma[k][g][i];
                }
                lp.push_row(row, Relation::Eq, ms.mu[k] * gamma[i]);
            }
        }
    }
    Ok(())
}

/// Reads a multiplier set out of an optimal solution vector.
pub(crate) fn extract_multipliers(
    x: &[f64],
    layout: &VarLayout,
    table: &ExtremalDataTable,
    lambda0: f64,
) -> Result<MultiplierSet, CertifyError> {
    let n = layout.n;
    let mut p = Vec::with_capacity(layout.n_steps + 1);
    let mut mu = Vec::with_capacity(layout.n_steps + 1);
    let mut gamma = Vec::with_capacity(layout.n_steps + 1);
    for k in 0..=layout.n_steps {
        let pk: Vec<f64> = (0..n)
            .map(|i| x[layout.pp[k] + i] - x[layout.pm[k] + i])
            .collect();
        p.push(pk);
        // Solver roundoff can leave a weight a few ulps below its zero
        // bound; clamp that noise, but treat anything materially negative
        // as a solver fault.
        let weight = |col: usize| -> Result<f64, CertifyError> {
            let v = x[col];
            if v < -1e-9 {
                return Err(CertifyError::Internal(format!(
                    "solver returned weight {v} below its zero bound"
                )));
            }
            Ok(v.max(0.0))
        };
        let mut atom = 0.0;
        for &c in &layout.w[k] {
            atom += weight(c)?;
        }
        mu.push(atom);
        if atom > 0.0 {
            let mut sel = vec![0.0; n];
            for (g, &col) in layout.w[k].iter().enumerate() {
                for i in 0..n {
                    sel[i] += weight(col)? * table.gamma[k][g][i] / atom;
                }
            }
            gamma.push(Some(sel));
        } else if let Some(first) = table.gamma[k].first() {
            gamma.push(Some(first.clone()));
        } else {
            gamma.push(None);
        }
    }
    let mut ms = MultiplierSet {
        p,
        lambda0,
        mu,
        gamma,
        q: Vec::new(),
    };
    ms.q = super::assemble_q(&ms, table)?;
    Ok(ms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linprog::{solve_lp, LpOutcome, LpSettings};
    use crate::testbed::{riding_optimum, riding_problem};

    fn riding_table(n_steps: usize) -> ExtremalDataTable {
        let problem = riding_problem(n_steps);
        let process = riding_optimum(n_steps);
        crate::model::compile(&problem, &process, 1e-9).unwrap()
    }

    #[test]
    fn layout_skips_measure_columns_off_the_active_arc() {
        let table = riding_table(8);
        let built = build_multiplier_lp(&table, Normalization::Normal).unwrap();
        for k in 0..4 {
            assert!(built.layout.w[k].is_empty(), "node {k} inactive");
        }
        for k in 4..=8 {
            assert_eq!(built.layout.w[k].len(), 1, "node {k} active");
        }
        assert!(built.layout.theta.is_some());
        assert!(built.layout.omega.is_some());
    }

    #[test]
    fn abnormal_modes_drop_cost_weight_blocks() {
        let table = riding_table(8);
        let built = build_multiplier_lp(&table, Normalization::AbnormalMeasure).unwrap();
        assert!(built.layout.theta.is_none());
        assert!(built.layout.omega.is_none());
        let adjoint = build_multiplier_lp(
            &table,
            Normalization::AbnormalAdjoint {
                component: 0,
                positive: true,
            },
        )
        .unwrap();
        assert!(adjoint.layout.w.iter().all(|cols| cols.is_empty()));
    }

    #[test]
    fn empty_gradient_set_at_active_node_is_rejected() {
        let mut table = riding_table(8);
        table.gamma[6].clear();
        let err = build_multiplier_lp(&table, Normalization::Normal).unwrap_err();
        match err {
            CertifyError::Structural(msg) => {
                assert!(msg.contains("node 6"), "{msg}")
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn normal_mode_on_the_riding_optimum_is_feasible() {
        let table = riding_table(8);
        let built = build_multiplier_lp(&table, Normalization::Normal).unwrap();
        let outcome = solve_lp(&built.lp, &LpSettings::default()).unwrap();
        match outcome {
            LpOutcome::Optimal { x, .. } => {
                let ms = extract_multipliers(&x, &built.layout, &table, 1.0).unwrap();
                let dt = table.grid.dt();
                assert!(
                    ms.p[0][0] >= -1.0 - 1e-7 && ms.p[0][0] <= -1.0 + dt + 1e-7,
                    "p_0 = {}",
                    ms.p[0][0]
                );
                for k in 0..4 {
                    assert_eq!(ms.mu[k], 0.0, "atom off the active arc");
                }
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }
}
