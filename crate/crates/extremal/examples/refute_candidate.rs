//! Refute extremality with verified infeasibility certificates.
//!
//! The built-in boundary-arc counterexample: a candidate that rides the
//! state constraint the whole way and satisfies the classical necessary
//! conditions trivially (all multipliers zero except the cost one), yet
//! is not a local minimizer. The sharpened conditions detect this: every
//! normalization mode's multiplier program is infeasible, each backed by
//! a Farkas certificate that is re-verified outside the solver here.
//!
//! Run with: cargo run --example refute_candidate

use extremal::certify::{
    build_multiplier_lp, certify_extremal, check_classical, CertifySettings, ClassicalVerdict,
    Verdict,
};
use extremal::example_l::{example_l_table, face_problem, improving_family, zero_candidate};
use extremal::linprog::verify_farkas;
use extremal::model::eval_cost;

fn main() {
    let n_steps = 64;
    let table = example_l_table(n_steps);
    let settings = CertifySettings::default();

    let certificate = certify_extremal(&table, &settings).unwrap();
    let refutations = match &certificate.verdict {
        Verdict::NotExtremal { refutations } => refutations,
        other => panic!("expected a refutation, got {other:?}"),
    };
    println!("verdict: not an extremal — no nonzero multiplier tuple exists");
    for refuted in refutations {
        let lp = build_multiplier_lp(&table, refuted.mode).unwrap();
        let ok = verify_farkas(&lp.lp, &refuted.certificate, settings.lp_tol).unwrap();
        println!(
            "  mode {:<22} infeasible; certificate re-verified: {ok}",
            refuted.mode.label(),
        );
        assert!(ok);
    }

    // The classical conditions cannot tell: they accept the candidate.
    match check_classical(&table, &settings).unwrap() {
        ClassicalVerdict::Feasible { multipliers, .. } => {
            let max_p = multipliers
                .p
                .iter()
                .flatten()
                .fold(0.0f64, |acc, v| acc.max(v.abs()));
            println!(
                "classical conditions: feasible with cost multiplier {} and |p| <= {max_p:.1e}",
                multipliers.lambda0,
            );
        }
        ClassicalVerdict::Infeasible { .. } => {
            panic!("the classical conditions should accept this candidate")
        }
    }

    // And indeed the candidate is beaten outright.
    let problem = face_problem(n_steps);
    let alpha = 0.2;
    let zero_cost = eval_cost(&problem, &zero_candidate(n_steps)).unwrap();
    let better = eval_cost(&problem, &improving_family(n_steps, alpha)).unwrap();
    println!(
        "candidate cost {zero_cost} vs admissible competitor {better:.4} \
         (expected -3a/4 = {:.4} at a = {alpha})",
        -0.75 * alpha,
    );
}
