//! Approximate a state-constrained value by penalization.
//!
//! The hard constraint x >= 0 is replaced by a running penalty
//! w * max(0, -x) for a schedule of growing weights w. The penalized
//! values climb toward the constrained value from below, the worst
//! constraint violation shrinks, and the penalty subgradients act as a
//! proxy for the constraint measure.
//!
//! Run with: cargo run --example penalty_schedule

use extremal::linprog::LpSettings;
use extremal::penalab::{run_schedule, schedule_csv, PenaltySchedule};
use extremal::testbed::riding_problem;

fn main() {
    let problem = riding_problem(24);
    let schedule = PenaltySchedule::default_powers();
    let report = run_schedule(&problem, &schedule, &LpSettings::default()).unwrap();

    println!("constrained value: {:.6}", report.constrained_cost);
    println!(
        "monotone: {}, bounded by the constrained value: {}, final gap: {:.2e}",
        report.monotone,
        report.bounded,
        report.final_gap(),
    );
    println!();
    print!("{}", schedule_csv(&report));
}
