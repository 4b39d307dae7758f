//! The eight release gates, one test running them all so the pass/fail
//! table prints together. Each line restates the measured evidence from
//! the built-in checks; any failure panics after the full table is shown.

use extremal::selftest::run_all;

#[test]
fn acceptance() {
    let outcomes = run_all();
    assert_eq!(outcomes.len(), 8);
    let mut failures = 0usize;
    for outcome in &outcomes {
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {} [{status}] {}: {}",
            outcome.index, outcome.name, outcome.details
        );
        if !outcome.passed {
            failures += 1;
        }
    }
    assert_eq!(
        failures, 0,
        "{failures} acceptance criterion(s) failed; see the table above"
    );
}
