//! The built-in Example (L): a selection-weighted instance separating the
//! measure-sharpened conditions from the classical ones.
//!
//! On `[0, 1]`, minimize `∫ (w₁|x−u₁| + w₂|x−u₂| + x) dt` subject to
//! `ẋ = 4w₁u₁ + 4w₂u₂`, `x ≥ −1`, `u ∈ [−1,1]²`, `(w₁,w₂)` in the unit
//! simplex, and `x(0) = 0`. The candidate is the rest point
//! `(x, u₁, u₂, w₁, w₂) = (0, 0, 0, 1, 0)` with cost `0`.
//!
//! The classical conditions accept it: with every multiplier zero except
//! `λ₀ = 1`, the adjoint inclusion holds because `0 ∈ [0, 2] = ∂ₓL` and
//! the maximization condition is slack. The sharpened conditions refuse
//! it: the joint `(x, u)`-subdifferential couples the two, forcing
//! `ṗ = λ₀ − 4p` with `p(1) = 0` and `4|p(t)| ≤ λ₀`, which fails for
//! `t < 1 − ln(2)/4 ≈ 0.8267`. The candidate is indeed not a minimum —
//! the family `(−4αt, −α, 0, 1, 0)` has cost `−3α/4 < 0`.
//!
//! The bilinear dynamics put the full instance outside the linear-convex
//! class, so it ships as a hand-coded data table. Both joint running-cost
//! generators follow from gradient limits at the candidate:
//! `w₁|x−u₁|` contributes `±(1, −1)` in `(x, u₁)` (the kink, scaled by
//! `w₁ = 1`), `w₂|x−u₂|` contributes nothing (every gradient limit
//! vanishes as `w₂ → 0` with `x−u₂ → 0`), and the plain `x` term shifts
//! the state component by one — giving `(ξ, ζ) ∈ {(2, −e₁), (0, e₁)}`.
//! The simplex normal cone at the vertex `(1, 0)` is spanned by
//! `±(1, 1)` and `(0, −1)`.
//!
//! [`face_problem`] freezes the selection at `w ≡ (1, 0)`, which lands
//! the instance inside the linear-convex class (`ẋ = 4u₁`, running cost
//! `|x−u₁| + x`): the refutation persists there, the compiled table can
//! be cross-checked against the hand-coded one, and [`improving_family`]
//! evaluates the descent family through the generic cost evaluator.

use crate::model::{
    AffinePiece, ExtremalDataTable, Grid, LcProblem, MaxAffine, PerNode, Polytope, Process, PwaSum,
    TableOrigin,
};

/// Hand-coded certifier table for the full instance at the rest-point
/// candidate, on an `n_steps`-interval grid over `[0, 1]`.
///
/// Control ordering is `(u₁, u₂, w₁, w₂)`. The state constraint
/// `h = −x − 1` is inactive everywhere along the candidate, so no node
/// admits measure atoms.
pub fn example_l_table(n_steps: usize) -> ExtremalDataTable {
    let grid = Grid::new(0.0, 1.0, n_steps).unwrap();
    let nodes = n_steps + 1;
    // d f/du at the candidate: (4w₁, 4w₂, 4u₁, 4u₂) = (4, 0, 0, 0).
    let fu = vec![vec![4.0, 0.0, 0.0, 0.0]];
    // Joint running-cost generators (ξ | ζ) at the candidate.
    let lsub = vec![
        (vec![2.0], vec![-1.0, 0.0, 0.0, 0.0]),
        (vec![0.0], vec![1.0, 0.0, 0.0, 0.0]),
    ];
    // N_U at ((0,0), (1,0)): the box is slack, the simplex vertex
    // contributes span{±(1,1)} + cone{(0,−1)} in the (w₁, w₂) block.
    let ncone = vec![
        vec![0.0, 0.0, 0.0, -1.0],
        vec![0.0, 0.0, 1.0, 1.0],
        vec![0.0, 0.0, -1.0, -1.0],
    ];
    // Maximization samples (f, L) at the candidate state: the candidate
    // pair first, then the distinct values over the control set's
    // extreme points (f = ±4, each with running cost 1).
    let wsamples = vec![(vec![0.0], 0.0), (vec![4.0], 1.0), (vec![-4.0], 1.0)];
    ExtremalDataTable {
        n: 1,
        m: 4,
        grid,
        fx: vec![vec![vec![0.0]]; n_steps],
        fu: vec![fu; n_steps],
        lsub: vec![lsub; n_steps],
        ncone: vec![ncone; n_steps],
        wsamples: vec![wsamples; n_steps],
        h: vec![-1.0; nodes],
        gamma: vec![vec![vec![-1.0]]; nodes],
        tol_active: vec![2e-6; nodes],
        l_sub: vec![vec![0.0, 0.0]],
        e_ncone: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
        origin: TableOrigin::HandCoded {
            label: "example-l".to_string(),
        },
    }
}

/// The linear-convex face of the instance at the frozen selection
/// `w ≡ (1, 0)`: minimize `∫ (|x−u₁| + x) dt`, `ẋ = 4u₁`,
/// `u ∈ [−1,1]²`, `x ≥ −1`, `x(0) = 0` (the second control is inert).
pub fn face_problem(n_steps: usize) -> LcProblem {
    // |x−u₁| + x = max(2x − u₁, u₁) as one max-affine term over (x, u).
    let running = PwaSum {
        terms: vec![MaxAffine {
            pieces: vec![
                AffinePiece {
                    gradient: vec![2.0, -1.0, 0.0],
                    offset: 0.0,
                },
                AffinePiece {
                    gradient: vec![0.0, 1.0, 0.0],
                    offset: 0.0,
                },
            ],
        }],
    };
    let endpoint_set = Polytope {
        dim: 2,
        c: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
        d: vec![0.0, 0.0],
    };
    LcProblem::new(
        Grid::new(0.0, 1.0, n_steps).unwrap(),
        PerNode::Constant(vec![vec![0.0]]),
        PerNode::Constant(vec![vec![4.0, 0.0]]),
        PerNode::Constant(vec![-1.0]),
        PerNode::Constant(-1.0),
        PerNode::Constant(running),
        PwaSum::zero(),
        PerNode::Constant(Polytope::hyperbox(2, -1.0, 1.0)),
        endpoint_set,
        PerNode::Constant(vec![]),
    )
}

/// The rest-point candidate on the face problem's grid.
pub fn zero_candidate(n_steps: usize) -> Process {
    Process {
        x: vec![vec![0.0]; n_steps + 1],
        u: vec![vec![0.0, 0.0]; n_steps],
    }
}

/// The descent family `(x, u₁, u₂) = (−4αt, −α, 0)` on the face
/// problem's grid; admissible for `0 < α ≤ 1/4`, with continuous-time
/// cost exactly `−3α/4`.
pub fn improving_family(n_steps: usize, alpha: f64) -> Process {
    let dt = 1.0 / n_steps as f64;
    let x = (0..=n_steps)
        .map(|k| vec![-4.0 * alpha * k as f64 * dt])
        .collect();
    let u = (0..n_steps).map(|_| vec![-alpha, 0.0]).collect();
    Process { x, u }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certify_extremal, CertifySettings, ClassicalVerdict, Verdict};
    use crate::direct::{solve_direct, DirectOutcome};
    use crate::linprog::LpSettings;
    use crate::model::{check_admissible, compile, eval_cost};

    #[test]
    fn hand_table_and_face_problem_validate() {
        example_l_table(8).validate().unwrap();
        face_problem(8).validate(1e-7).unwrap();
        let report = check_admissible(&face_problem(8), &zero_candidate(8), 1e-9).unwrap();
        assert!(report.admissible());
        assert_eq!(
            eval_cost(&face_problem(8), &zero_candidate(8)).unwrap(),
            0.0
        );
    }

    #[test]
    fn rest_point_is_refuted_but_passes_the_classical_conditions() {
        let table = example_l_table(16);
        let settings = CertifySettings::default();
        let certificate = certify_extremal(&table, &settings).unwrap();
        match &certificate.verdict {
            Verdict::NotExtremal { refutations } => {
                assert_eq!(refutations.len(), 4)
            }
            other => panic!("expected refutation, got {other:?}"),
        }
        match &certificate.classical {
            ClassicalVerdict::Feasible { mode, multipliers } => {
                assert_eq!(mode.lambda0(), 1.0);
                let max_p = multipliers
                    .p
                    .iter()
                    .flat_map(|pk| pk.iter())
                    .fold(0.0f64, |acc, v| acc.max(v.abs()));
                assert!(max_p <= 1e-7, "classical adjoint max {max_p}");
            }
            other => panic!("expected classical feasibility, got {other:?}"),
        }
        // The classical multipliers are audited outside the LP.
        assert!(certificate.weierstrass.as_ref().unwrap().passes());
    }

    #[test]
    fn frozen_face_reproduces_the_hand_verdicts() {
        let problem = face_problem(16);
        let table = compile(&problem, &zero_candidate(16), 1e-9).unwrap();
        let settings = CertifySettings::default();
        let certificate = certify_extremal(&table, &settings).unwrap();
        assert!(matches!(certificate.verdict, Verdict::NotExtremal { .. }));
        match &certificate.classical {
            ClassicalVerdict::Feasible { mode, multipliers } => {
                assert_eq!(mode.lambda0(), 1.0);
                for pk in &multipliers.p {
                    assert!(pk[0].abs() <= 1e-7);
                }
            }
            other => panic!("expected classical feasibility, got {other:?}"),
        }
    }

    #[test]
    fn descent_family_cost_approaches_the_closed_form() {
        let alpha = 0.2;
        for (n_steps, tol) in [(200usize, 0.01), (1000, 0.002)] {
            let problem = face_problem(n_steps);
            let family = improving_family(n_steps, alpha);
            let report = check_admissible(&problem, &family, 1e-9).unwrap();
            assert!(report.admissible());
            let cost = eval_cost(&problem, &family).unwrap();
            let target = -0.75 * alpha;
            assert!(
                (cost - target).abs() <= tol,
                "N={n_steps}: cost {cost} vs {target}"
            );
            assert!(cost < 0.0);
        }
    }

    #[test]
    fn direct_solver_confirms_the_rest_point_is_beatable() {
        let problem = face_problem(64);
        match solve_direct(&problem, &LpSettings::default()).unwrap() {
            DirectOutcome::Optimal { cost, .. } => {
                assert!(cost <= -0.15, "direct optimum {cost}");
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }
}
