//! Randomized instance generators and independent oracles for the test
//! suites.
//!
//! The point of this module is that nothing in it shares machinery with the
//! code it checks. The linear-program oracle classifies an instance by
//! enumerating candidate vertices with Gaussian elimination — no tableau, no
//! pivoting — so agreement between [`enumerate_lp`] and
//! [`crate::linprog::solve_lp`] is evidence, not circularity.
//!
//! Generators draw small-integer data from a seeded stream, which keeps
//! failures reproducible from the seed alone and keeps the enumeration
//! oracle's arithmetic effectively exact: vertex coordinates are ratios of
//! small integer determinants, so a constraint is either satisfied exactly
//! or violated by far more than the comparison tolerance.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linprog::{LpProblem, Relation};
use crate::model::{AffinePiece, Grid, LcProblem, MaxAffine, PerNode, Polytope, Process, PwaSum};

/// Classification produced by the enumeration oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleVerdict {
    Optimal { value: f64 },
    Infeasible,
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when the system is (numerically) singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
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

/// Classifies a fully box-bounded linear program by brute force.
///
/// Every subset of `n` constraint hyperplanes (rows and bound faces) is
/// intersected; feasible intersection points are vertices of the feasible
/// polytope, and the least objective value over them is the optimum. A
/// compact nonempty feasible set always has an optimal vertex, so finding
/// none proves infeasibility. Errors if some variable lacks a bound (the
/// vertex argument needs compactness).
pub fn enumerate_lp(lp: &LpProblem, tol: f64) -> Result<OracleVerdict, String> {
    let n = lp.n_vars();
    if n == 0 {
        return Err("oracle needs at least one variable".into());
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if lo.is_none() || hi.is_none() {
            return Err(format!(
                "oracle requires box bounds; variable {j} is unbounded"
            ));
        }
    }

    // Candidate hyperplanes: every row at equality, every bound face.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        planes.push((row.coeffs.clone(), row.rhs));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lo.unwrap()));
        planes.push((e, hi.unwrap()));
    }

    let feasible = |x: &[f64]| -> bool {
        for row in &lp.rows {
            let ax: f64 = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let ok = match row.relation {
                Relation::Le => ax <= row.rhs + tol,
                Relation::Ge => ax >= row.rhs - tol,
                Relation::Eq => (ax - row.rhs).abs() <= tol,
            };
            if !ok {
                return false;
            }
        }
        lp.bounds
            .iter()
            .zip(x)
            .all(|(&(lo, hi), &v)| v >= lo.unwrap() - tol && v <= hi.unwrap() + tol)
    };

    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = subset.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_dense(a, b) {
            if feasible(&x) {
                let value: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(match best {
                    None => value,
                    Some(cur) => cur.min(value),
                });
            }
        }
        // Advance the lexicographic n-subset of 0..planes.len().
        let total = planes.len();
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(match best {
                    Some(value) => OracleVerdict::Optimal { value },
                    None => OracleVerdict::Infeasible,
                });
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

/// Draws a small box-bounded linear program with integer data.
///
/// Dimensions, rows, relations, coefficients, and bounds all come from the
/// seeded stream; the instance may be feasible or infeasible (equality rows
/// make the latter common), which is exactly the mix the classification
/// agreement suite wants.
pub fn random_box_lp(seed: u64) -> LpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3usize);
    let nrows = rng.gen_range(0..=5usize);
    let mut lp = LpProblem::minimize((0..n).map(|_| rng.gen_range(-3..=3) as f64).collect());
    for j in 0..n {
        let lo = rng.gen_range(-2..=0) as f64;
        let hi = lo + rng.gen_range(1..=4) as f64;
        lp.set_bounds(j, Some(lo), Some(hi));
    }
    for _ in 0..nrows {
        let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect();
        let relation = match rng.gen_range(0..6) {
            0 => Relation::Eq, // equalities rarer: they dominate infeasibility
            1 | 2 => Relation::Ge,
            _ => Relation::Le,
        };
        let rhs = rng.gen_range(-4..=6) as f64;
        lp.push_row(coeffs, relation, rhs);
    }
    lp
}

/// Draws a linear program that is infeasible by construction.
///
/// Starting from [`random_box_lp`], nonnegative integer weights aggregate
/// the row residuals (the quantities that are nonnegative at any point
/// satisfying the rows) into one affine function `alpha·x + beta >= 0`, and
/// the row `alpha·x + beta <= -1` is appended. No point can satisfy both,
/// so the instance is infeasible whatever the bounds are.
pub fn random_infeasible_lp(seed: u64) -> LpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut lp = random_box_lp(seed);
    let n = lp.n_vars();
    let mut alpha = vec![0.0; n];
    let mut beta = 0.0;
    for row in &lp.rows {
        let w = rng.gen_range(0..=2) as f64;
        if w == 0.0 {
            continue;
        }
        match row.relation {
            Relation::Le => {
                // residual b - a·x
                for (j, &a) in row.coeffs.iter().enumerate() {
                    alpha[j] -= w * a;
                }
                beta += w * row.rhs;
            }
            Relation::Ge | Relation::Eq => {
                // residual a·x - b
                for (j, &a) in row.coeffs.iter().enumerate() {
                    alpha[j] += w * a;
                }
                beta -= w * row.rhs;
            }
        }
    }
    // alpha·x + beta >= 0 holds wherever the rows hold; contradict it.
    lp.push_row(alpha, Relation::Le, -1.0 - beta);
    lp
}

/// The riding-constraint instance: minimize the state integral on `[0, 2]`
/// with `x' = u`, `u` in `[-1, 1]`, `x(0) = 1`, and the state constraint
/// `x >= 0` (encoded as `h = -x <= 0`).
///
/// Everything about it is known in closed form: the continuous optimum
/// descends at full speed until it hits the constraint at `t = 1` and then
/// rides it, for a cost of `1/2`; the discrete transcription on an even
/// `n_steps`-interval grid has optimal cost exactly `1/2 + 1/n_steps`, and
/// the normal-mode multiplier system at the discrete optimum is feasible
/// with the adjoint climbing linearly from `p(0)` in `[-1, -1 + dt]` to
/// zero-mean atoms on the constrained arc. That makes it the reference
/// instance for every layer: the direct solver, the certifier, and the
/// sufficiency cross-check.
pub fn riding_problem(n_steps: usize) -> LcProblem {
    let grid = Grid::new(0.0, 2.0, n_steps).unwrap();
    let running = PwaSum {
        terms: vec![MaxAffine {
            pieces: vec![AffinePiece {
                gradient: vec![1.0, 0.0],
                offset: 0.0,
            }],
        }],
    };
    // Endpoint set: x_first = 1 (two rows), x_last free.
    let endpoint_set = Polytope {
        dim: 2,
        c: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
        d: vec![1.0, -1.0],
    };
    LcProblem::new(
        grid,
        PerNode::Constant(vec![vec![0.0]]),
        PerNode::Constant(vec![vec![1.0]]),
        PerNode::Constant(vec![-1.0]),
        PerNode::Constant(0.0),
        PerNode::Constant(running),
        PwaSum::zero(),
        PerNode::Constant(Polytope::hyperbox(1, -1.0, 1.0)),
        endpoint_set,
        PerNode::Constant(vec![vec![-1.0], vec![1.0]]),
    )
}

/// The exact discrete optimum of [`riding_problem`] for even `n_steps`:
/// descend at full speed to zero, then hold.
pub fn riding_optimum(n_steps: usize) -> Process {
    assert!(n_steps % 2 == 0, "the exact optimum needs an even grid");
    let dt = 2.0 / n_steps as f64;
    let half = n_steps / 2;
    let mut x = Vec::with_capacity(n_steps + 1);
    let mut u = Vec::with_capacity(n_steps);
    for k in 0..=n_steps {
        let xk = if k <= half { 1.0 - k as f64 * dt } else { 0.0 };
        x.push(vec![xk]);
    }
    for k in 0..n_steps {
        u.push(vec![if k < half { -1.0 } else { 0.0 }]);
    }
    Process { x, u }
}

/// A seeded random linear-convex instance with a nonempty feasible set.
///
/// Dimensions (`n, m <= 2`, 4–8 intervals on `[0, 1]`), dynamics, and the
/// piecewise-affine costs are drawn on a quarter-integer lattice from the
/// seed. The initial state is pinned, the terminal state free, and the
/// state constraint's offset is placed against a simulated reference
/// trajectory: half the instances make the constraint touch that
/// reference, the rest leave a margin of `1/2`. Either way the reference
/// is admissible, so the instance is never infeasible (and bounded, since
/// states are reachability-bounded and all costs piecewise affine).
pub fn random_lc_instance(seed: u64) -> LcProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51ce_5eed_0f0f_aaaa);
    fn quarters(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
        let steps = ((hi - lo) / 0.25).round() as i64;
        lo + 0.25 * rng.gen_range(0..=steps) as f64
    }
    let n = rng.gen_range(1..=2usize);
    let m = rng.gen_range(1..=2usize);
    let n_steps = rng.gen_range(4..=8usize);
    let grid = Grid::new(0.0, 1.0, n_steps).unwrap();
    let dt = grid.dt();

    let a: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| quarters(&mut rng, -0.75, 0.75)).collect())
        .collect();
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| quarters(&mut rng, -1.0, 1.0)).collect())
        .collect();

    let piece = |rng: &mut ChaCha8Rng, dim: usize| AffinePiece {
        gradient: (0..dim).map(|_| quarters(rng, -1.0, 1.0)).collect(),
        offset: quarters(rng, -0.5, 0.5),
    };
    let running = PwaSum {
        terms: vec![MaxAffine {
            pieces: {
                let count = rng.gen_range(1..=3usize);
                (0..count).map(|_| piece(&mut rng, n + m)).collect()
            },
        }],
    };
    let endpoint_cost = if rng.gen_bool(0.5) {
        PwaSum::zero()
    } else {
        PwaSum {
            terms: vec![MaxAffine {
                pieces: {
                    let count = rng.gen_range(1..=2usize);
                    (0..count).map(|_| piece(&mut rng, 2 * n)).collect()
                },
            }],
        }
    };

    let x0: Vec<f64> = (0..n).map(|_| quarters(&mut rng, -0.5, 0.5)).collect();
    let mut endpoint_rows = Vec::with_capacity(2 * n);
    let mut endpoint_rhs = Vec::with_capacity(2 * n);
    for (i, &v) in x0.iter().enumerate() {
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; 2 * n];
            row[i] = sign;
            endpoint_rows.push(row);
            endpoint_rhs.push(sign * v);
        }
    }
    let endpoint_set = Polytope {
        dim: 2 * n,
        c: endpoint_rows,
        d: endpoint_rhs,
    };

    // Reference trajectory under random box controls; the constraint
    // offset is placed so this reference stays admissible.
    let reference_u: Vec<Vec<f64>> = (0..n_steps)
        .map(|_| (0..m).map(|_| quarters(&mut rng, -1.0, 1.0)).collect())
        .collect();
    let mut x = x0.clone();
    let mut trajectory = vec![x.clone()];
    for uk in &reference_u {
        let mut next = x.clone();
        for i in 0..n {
            let mut rate = 0.0;
            for j in 0..n {
                rate += a[i][j] * x[j];
            }
            for j in 0..m {
                rate += b[i][j] * uk[j];
            }
            next[i] += dt * rate;
        }
        trajectory.push(next.clone());
        x = next;
    }
    // A zero gradient with a touching offset would make the constraint
    // active with an empty sharp subdifferential; redraw until nonzero.
    let d: Vec<f64> = loop {
        let draw: Vec<f64> = (0..n).map(|_| quarters(&mut rng, -1.0, 1.0)).collect();
        if draw.iter().any(|&v| v != 0.0) {
            break draw;
        }
    };
    let h_max = trajectory
        .iter()
        .map(|xk| d.iter().zip(xk).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = if rng.gen_bool(0.5) { 0.0 } else { 0.5 };
    let e = -h_max - margin;

    LcProblem::new(
        grid,
        PerNode::Constant(a),
        PerNode::Constant(b),
        PerNode::Constant(d),
        PerNode::Constant(e),
        PerNode::Constant(running),
        endpoint_cost,
        PerNode::Constant(Polytope::hyperbox(m, -1.0, 1.0)),
        endpoint_set,
        PerNode::Constant(vec![]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linprog::{solve_lp, verify_farkas, LpOutcome, LpSettings};

    #[test]
    fn oracle_matches_hand_computed_instance() {
        // minimize -x - y s.t. x + y <= 1 on [0,1]^2: optimum -1.
        let mut lp = LpProblem::minimize(vec![-1.0, -1.0]);
        lp.push_row(vec![1.0, 1.0], Relation::Le, 1.0);
        lp.set_bounds(0, Some(0.0), Some(1.0));
        lp.set_bounds(1, Some(0.0), Some(1.0));
        match enumerate_lp(&lp, 1e-9).unwrap() {
            OracleVerdict::Optimal { value } => assert!((value + 1.0).abs() < 1e-12),
            v => panic!("unexpected verdict {v:?}"),
        }
    }

    #[test]
    fn oracle_detects_crossing_rows() {
        let mut lp = LpProblem::minimize(vec![0.0]);
        lp.push_row(vec![1.0], Relation::Le, -1.0);
        lp.push_row(vec![1.0], Relation::Ge, 1.0);
        lp.set_bounds(0, Some(-5.0), Some(5.0));
        assert_eq!(enumerate_lp(&lp, 1e-9).unwrap(), OracleVerdict::Infeasible);
    }

    #[test]
    fn solver_agrees_with_oracle_on_random_instances() {
        let settings = LpSettings::default();
        let mut optima = 0usize;
        let mut infeasible = 0usize;
        for seed in 0..300u64 {
            let lp = random_box_lp(seed);
            let oracle = enumerate_lp(&lp, 1e-7).unwrap();
            let solved = solve_lp(&lp, &settings)
                .unwrap_or_else(|e| panic!("seed {seed}: solver error {e}"));
            match (&oracle, &solved) {
                (OracleVerdict::Optimal { value }, LpOutcome::Optimal { value: v, .. }) => {
                    assert!(
                        (value - v).abs() <= 1e-8 * (1.0 + value.abs()),
                        "seed {seed}: oracle {value}, solver {v}"
                    );
                    optima += 1;
                }
                (OracleVerdict::Infeasible, LpOutcome::Infeasible { certificate }) => {
                    assert!(
                        verify_farkas(&lp, certificate, 1e-9).unwrap(),
                        "seed {seed}: certificate failed verification"
                    );
                    infeasible += 1;
                }
                (o, s) => panic!("seed {seed}: oracle {o:?} vs solver {s:?}"),
            }
        }
        // The generator must actually exercise both classes.
        assert!(optima >= 50, "only {optima} feasible instances");
        assert!(infeasible >= 50, "only {infeasible} infeasible instances");
    }

    #[test]
    fn random_lc_instances_validate_and_are_deterministic() {
        for seed in 0..40u64 {
            let problem = random_lc_instance(seed);
            problem
                .validate(1e-7)
                .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            let again = random_lc_instance(seed);
            assert_eq!(problem.grid, again.grid, "seed {seed}: grid drifted");
            assert_eq!(
                problem.constraint_e.get(0),
                again.constraint_e.get(0),
                "seed {seed}: constraint offset drifted"
            );
        }
        // The construction promises a nonempty, bounded problem: the
        // reference trajectory is admissible and the costs are piecewise
        // affine over reachability-bounded states. Spot-check by solving.
        let settings = LpSettings::default();
        for seed in 0..12u64 {
            let problem = random_lc_instance(seed);
            match crate::direct::solve_direct(&problem, &settings) {
                Ok(crate::direct::DirectOutcome::Optimal { .. }) => {}
                other => panic!("seed {seed}: expected an optimum, got {other:?}"),
            }
        }
    }

    #[test]
    fn constructed_infeasible_instances_yield_verified_certificates() {
        let settings = LpSettings::default();
        for seed in 0..80u64 {
            let lp = random_infeasible_lp(seed);
            match solve_lp(&lp, &settings)
                .unwrap_or_else(|e| panic!("seed {seed}: solver error {e}"))
            {
                LpOutcome::Infeasible { certificate } => {
                    assert!(
                        verify_farkas(&lp, &certificate, 1e-9).unwrap(),
                        "seed {seed}: certificate failed verification"
                    );
                }
                other => panic!("seed {seed}: expected infeasible, got {other:?}"),
            }
        }
    }
}
