//! Certify a candidate as a normal extremal and issue a global-minimum
//! certificate.
//!
//! Pipeline: solve the riding-constraint instance, compile the optimum
//! into the certifier's data table, search the normalization family for
//! multipliers, audit the pointwise maximization, and cross-check the
//! sufficiency claim against an independent re-solve.
//!
//! Run with: cargo run --example certify_optimum

use extremal::certify::{
    certify_extremal, check_weierstrass, sufficiency_certificate, CertifySettings, Verdict,
};
use extremal::direct::{solve_direct, DirectOutcome};
use extremal::linprog::LpSettings;
use extremal::model::compile;
use extremal::testbed::riding_problem;

fn main() {
    let n_steps = 32;
    let problem = riding_problem(n_steps);
    let process = match solve_direct(&problem, &LpSettings::default()).unwrap() {
        DirectOutcome::Optimal { process, .. } => process,
        other => panic!("expected an optimum, got {other:?}"),
    };

    let table = compile(&problem, &process, 1e-7).unwrap();
    let settings = CertifySettings::default();
    let certificate = certify_extremal(&table, &settings).unwrap();

    let ms = match &certificate.verdict {
        Verdict::NormalExtremal { multipliers } => multipliers,
        other => panic!("expected a normal extremal, got {other:?}"),
    };
    println!("verdict: normal extremal (cost multiplier 1)");
    println!(
        "adjoint range: [{:.4}, {:.4}]",
        ms.p.iter().flatten().cloned().fold(f64::INFINITY, f64::min),
        ms.p.iter()
            .flatten()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max),
    );

    // The measure charges exactly the boundary arc {t >= 1}.
    let dt = problem.grid.dt();
    let atoms: Vec<(f64, f64)> = ms
        .mu
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(k, &m)| (k as f64 * dt, m))
        .collect();
    println!(
        "measure atoms: {} nodes, total mass {:.4}, earliest at t = {:.3}",
        atoms.len(),
        atoms.iter().map(|(_, m)| m).sum::<f64>(),
        atoms.first().map_or(f64::NAN, |(t, _)| *t),
    );

    let audit = check_weierstrass(&table, ms, settings.weierstrass_tol).unwrap();
    println!(
        "maximization audit: worst gap {:.3e} over {} nodes (pass: {})",
        audit.max_gap(),
        audit.gaps.len(),
        audit.passes(),
    );

    let global = sufficiency_certificate(&problem, &process, ms, &settings).unwrap();
    println!(
        "global minimum: candidate {:.6} vs independent re-solve {:.6} (gap {:.1e})",
        global.candidate_cost, global.direct_cost, global.gap,
    );
}
