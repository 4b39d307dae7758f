//! The on-disk problem and process schemas, round-tripped from code.
//!
//! Builds a two-state instance programmatically, renders it in the JSON
//! file schema, re-parses it, and runs the solve-certify chain on the
//! parsed copy — the same path the command-line binary takes.
//!
//! Run with: cargo run --example problem_files

use extremal::certify::{certify_extremal, CertifySettings, Verdict};
use extremal::direct::{solve_direct, DirectOutcome};
use extremal::files::{parse_problem, problem_to_json, process_to_json};
use extremal::linprog::LpSettings;
use extremal::model::{
    compile, AffinePiece, Grid, LcProblem, MaxAffine, PerNode, Polytope, PwaSum,
};

fn main() {
    // Double integrator: position x1, velocity x2, acceleration control.
    // Minimize the integral of |u| + x1 from (x1, x2)(0) = (1, 0), keep
    // x1 >= 0, endpoints otherwise free.
    let grid = Grid::new(0.0, 2.0, 24).unwrap();
    let a_mat = vec![vec![0.0, 1.0], vec![0.0, 0.0]];
    let b_mat = vec![vec![0.0], vec![1.0]];
    let running = PwaSum {
        terms: vec![
            // |u| over (x1, x2, u).
            MaxAffine {
                pieces: vec![
                    AffinePiece {
                        gradient: vec![0.0, 0.0, 1.0],
                        offset: 0.0,
                    },
                    AffinePiece {
                        gradient: vec![0.0, 0.0, -1.0],
                        offset: 0.0,
                    },
                ],
            },
            // x1.
            MaxAffine {
                pieces: vec![AffinePiece {
                    gradient: vec![1.0, 0.0, 0.0],
                    offset: 0.0,
                }],
            },
        ],
    };
    // Pin (x1, x2)(0) = (1, 0) with opposite row pairs; x(b) free.
    let endpoint_set = Polytope {
        dim: 4,
        c: vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0, 0.0],
        ],
        d: vec![1.0, -1.0, 0.0, 0.0],
    };
    let problem = LcProblem::new(
        grid,
        PerNode::Constant(a_mat),
        PerNode::Constant(b_mat),
        PerNode::Constant(vec![-1.0, 0.0]),
        PerNode::Constant(0.0),
        PerNode::Constant(running),
        PwaSum::zero(),
        PerNode::Constant(Polytope::hyperbox(1, -1.0, 1.0)),
        endpoint_set,
        PerNode::Constant(vec![]),
    );
    problem.validate(1e-7).unwrap();

    let text = problem_to_json(&problem).unwrap();
    println!("problem file ({} bytes):", text.len());
    for line in text.lines().take(12) {
        println!("  {line}");
    }
    println!("  ...");

    // Parse it back and run the chain on the parsed copy.
    let parsed = parse_problem(&text).unwrap();
    let (process, cost) = match solve_direct(&parsed, &LpSettings::default()).unwrap() {
        DirectOutcome::Optimal { process, cost, .. } => (process, cost),
        other => panic!("expected an optimum, got {other:?}"),
    };
    println!();
    println!("parsed copy solves to cost {cost:.6}");

    let table = compile(&parsed, &process, 1e-7).unwrap();
    let certificate = certify_extremal(&table, &CertifySettings::default()).unwrap();
    match certificate.verdict {
        Verdict::NormalExtremal { .. } => {
            println!("its optimum certifies as a normal extremal");
        }
        other => panic!("expected a normal extremal, got {other:?}"),
    }

    let process_text = process_to_json(&process);
    println!(
        "process file: {} bytes, byte-stable: {}",
        process_text.len(),
        process_to_json(&process) == process_text,
    );
}
