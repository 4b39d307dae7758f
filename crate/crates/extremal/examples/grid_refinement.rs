//! Watch the discrete values converge under grid refinement.
//!
//! Solves the riding-constraint instance on a doubling ladder of grids
//! and tabulates cost, worst state-constraint violation, and runtime.
//! The discrete optimum carries a quadrature offset of exactly 1/N here,
//! so halving the step halves the error.
//!
//! Run with: cargo run --example grid_refinement

use extremal::direct::{refinement_csv, refinement_table};
use extremal::linprog::LpSettings;
use extremal::testbed::riding_problem;

fn main() {
    let grids = [4, 8, 16, 32, 64, 128, 256];
    let rows = refinement_table(riding_problem, &grids, &LpSettings::default()).unwrap();

    print!("{}", refinement_csv(&rows));
    println!();
    println!("{:>5} {:>12} {:>12}", "N", "cost", "error");
    for row in &rows {
        println!(
            "{:>5} {:>12.8} {:>12.2e}",
            row.n_steps,
            row.cost,
            (row.cost - 0.5).abs(),
        );
    }
}
