//! Solve a state-constrained problem by direct transcription.
//!
//! The instance: minimize the integral of x over [0, 2] subject to
//! x' = u, |u| <= 1, x(0) = 1, and the state constraint x >= 0. Driving
//! x to zero at full speed and riding the boundary is optimal with cost
//! 1/2; the Euler discretization reproduces it up to a 1/N quadrature
//! offset.
//!
//! Run with: cargo run --example solve_direct

use extremal::direct::{solve_direct, DirectOutcome};
use extremal::linprog::LpSettings;
use extremal::testbed::riding_problem;

fn main() {
    let n_steps = 40;
    let problem = riding_problem(n_steps);
    let settings = LpSettings::default();

    match solve_direct(&problem, &settings).unwrap() {
        DirectOutcome::Optimal { process, cost, .. } => {
            println!("optimal cost on {n_steps} intervals: {cost:.6}");
            println!("continuous-time value:               0.500000");
            println!();
            println!("{:>6} {:>10} {:>8}", "t", "x", "u");
            let dt = problem.grid.dt();
            for k in 0..=n_steps {
                let u = if k < n_steps {
                    format!("{:8.3}", process.u[k][0])
                } else {
                    "       -".to_string()
                };
                if k % 4 == 0 || k == n_steps {
                    println!("{:6.2} {:10.6} {u}", k as f64 * dt, process.x[k][0]);
                }
            }
        }
        other => panic!("expected an optimum, got {other:?}"),
    }
}
