//! The linear-programming core: optima with duals, and infeasibility
//! with independently checkable Farkas certificates.
//!
//! Everything above this layer (transcription, multiplier search,
//! refutation) reduces to these two outcomes, so their evidence must be
//! verifiable without trusting the solver. This example re-checks both
//! by plain arithmetic.
//!
//! Run with: cargo run --example lp_certificates

use extremal::linprog::{
    solve_lp, verify_farkas, LpOutcome, LpProblem, LpRow, LpSettings, Relation,
};

fn main() {
    let settings = LpSettings::default();

    // minimize -x - 2y subject to x + y <= 4, y <= 3, x, y >= 0.
    let mut lp = LpProblem::minimize(vec![-1.0, -2.0]);
    lp.rows.push(LpRow {
        coeffs: vec![1.0, 1.0],
        relation: Relation::Le,
        rhs: 4.0,
    });
    lp.rows.push(LpRow {
        coeffs: vec![0.0, 1.0],
        relation: Relation::Le,
        rhs: 3.0,
    });
    lp.bounds = vec![(Some(0.0), None), (Some(0.0), None)];

    match solve_lp(&lp, &settings).unwrap() {
        LpOutcome::Optimal { x, value, duals } => {
            println!("optimum at ({}, {}) with value {value}", x[0], x[1]);
            // Strong duality check: the dual objective matches.
            let dual_value: f64 = duals.iter().zip(&lp.rows).map(|(y, row)| y * row.rhs).sum();
            println!("row duals {duals:?}; dual objective {dual_value}");
            assert_eq!(value, dual_value);
        }
        other => panic!("expected an optimum, got {other:?}"),
    }

    // x >= 3 and x + y <= 4 and y >= 2 cannot hold together.
    let mut bad = LpProblem::minimize(vec![0.0, 0.0]);
    bad.rows.push(LpRow {
        coeffs: vec![1.0, 1.0],
        relation: Relation::Le,
        rhs: 4.0,
    });
    bad.bounds = vec![(Some(3.0), None), (Some(2.0), None)];

    match solve_lp(&bad, &settings).unwrap() {
        LpOutcome::Infeasible { certificate } => {
            println!();
            println!(
                "infeasible; certificate row weights {:?}",
                certificate.row_weights
            );
            println!(
                "  lower-bound weights {:?}, upper-bound weights {:?}",
                certificate.lower_weights, certificate.upper_weights,
            );
            // The certificate is a nonnegative combination of constraints
            // that sums to an impossibility; re-verify it independently.
            let ok = verify_farkas(&bad, &certificate, settings.tol).unwrap();
            println!("independent verification: {ok}");
            assert!(ok);
        }
        other => panic!("expected infeasibility, got {other:?}"),
    }
}
