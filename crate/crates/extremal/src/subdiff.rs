//! Exact subdifferential calculus for piecewise-affine convex functions,
//! normal cones to polytopes, and the two state-constraint gradient-limit
//! sets used by the certifier.
//!
//! Everything here is *finitely generated*: a max of affine pieces has, at
//! any point, a subdifferential equal to the convex hull of the gradients of
//! its active pieces; a sum of such functions has the Minkowski sum of the
//! term subdifferentials; a polytope's normal cone at a point is the conic
//! hull of the outward normals of its active rows. These exact finite
//! descriptions are what let the multiplier conditions become linear
//! programs instead of abstract inclusions.

use crate::model::{LcProblem, MaxAffine, Polytope, PwaSum};

/// Whether a generator list spans by convex or by conic combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hull {
    Convex,
    Conic,
}

/// A convex set described by finitely many generators.
///
/// For subdifferentials the set is the convex hull of `points`; for normal
/// cones it is the conic hull (and an empty list means the cone `{0}`).
/// An empty list under [`Hull::Convex`] means the empty set.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSet {
    pub points: Vec<Vec<f64>>,
    pub hull: Hull,
}

impl GeneratorSet {
    pub fn convex(points: Vec<Vec<f64>>) -> Self {
        GeneratorSet {
            points,
            hull: Hull::Convex,
        }
    }

    pub fn conic(points: Vec<Vec<f64>>) -> Self {
        GeneratorSet {
            points,
            hull: Hull::Conic,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Errors from the subdifferential operations.
#[derive(Debug, Clone)]
pub enum SubdiffError {
    /// Argument dimension does not match the function or set.
    Dimension(String),
    /// A Minkowski-sum representation would exceed the generator budget.
    GeneratorOverflow { needed: usize, bound: usize },
    /// The queried point lies outside the polytope beyond tolerance.
    PointOutside { violation: f64 },
}

impl std::fmt::Display for SubdiffError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubdiffError::Dimension(msg) => write!(f, "dimension mismatch: {msg}"),
            SubdiffError::GeneratorOverflow { needed, bound } => write!(
                f,
                "subdifferential needs {needed} generators, above the bound {bound}; \
                 regroup cost terms to reduce the product"
            ),
            SubdiffError::PointOutside { violation } => {
                write!(f, "point lies outside the set by {violation:.3e}")
            }
        }
    }
}

impl std::error::Error for SubdiffError {}

/// Default cap on Minkowski-product generator counts.
pub const DEFAULT_GENERATOR_BOUND: usize = 4096;

/// Subdifferential of a max-of-affine function at `z`: the gradients of all
/// pieces whose value at `z` is within `tol` of the maximum. `tol` is
/// absolute; callers pick it scale-aware (the engine default is
/// `1e-7 * (1 + |f(z)|)`).
pub fn maxaffine_subdiff(f: &MaxAffine, z: &[f64], tol: f64) -> Result<GeneratorSet, SubdiffError> {
    if f.dim() != z.len() {
        return Err(SubdiffError::Dimension(format!(
            "function argument dimension {} vs point dimension {}",
            f.dim(),
            z.len()
        )));
    }
    let values: Vec<f64> = f.pieces.iter().map(|p| p.eval(z)).collect();
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let points = f
        .pieces
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v >= top - tol)
        .map(|(p, _)| p.gradient.clone())
        .collect();
    Ok(GeneratorSet::convex(points))
}

/// Subdifferential of a sum of max-affine terms at `z`: every sum of one
/// active gradient per term (the Minkowski sum of the term
/// subdifferentials, exact for convex piecewise-affine functions).
/// Duplicate generators are kept; hulls are unaffected.
pub fn pwasum_subdiff(
    f: &PwaSum,
    z: &[f64],
    tol: f64,
    generator_bound: usize,
) -> Result<GeneratorSet, SubdiffError> {
    let dim = z.len();
    let mut term_sets: Vec<Vec<Vec<f64>>> = Vec::with_capacity(f.terms.len());
    let mut product = 1usize;
    for term in &f.terms {
        let set = maxaffine_subdiff(term, z, tol)?;
        product = product.saturating_mul(set.points.len().max(1));
        if product > generator_bound {
            return Err(SubdiffError::GeneratorOverflow {
                needed: product,
                bound: generator_bound,
            });
        }
        term_sets.push(set.points);
    }
    let mut points: Vec<Vec<f64>> = vec![vec![0.0; dim]];
    for set in &term_sets {
        let mut next = Vec::with_capacity(points.len() * set.len());
        for base in &points {
            for g in set {
                let mut s = base.clone();
                for (si, gi) in s.iter_mut().zip(g) {
                    *si += gi;
                }
                next.push(s);
            }
        }
        points = next;
    }
    Ok(GeneratorSet::convex(points))
}

/// Normal cone of a polytope at a member point: the conic hull of the
/// outward normals (rows of `C`) of constraints active at `u` within a
/// scale-aware tolerance. The empty generator list is the cone `{0}`
/// (interior points). Errors if `u` violates the polytope by more than
/// `tol`.
pub fn normal_cone(set: &Polytope, u: &[f64], tol: f64) -> Result<GeneratorSet, SubdiffError> {
    if set.dim != u.len() {
        return Err(SubdiffError::Dimension(format!(
            "polytope dimension {} vs point dimension {}",
            set.dim,
            u.len()
        )));
    }
    let violation = set.violation(u);
    if violation > tol {
        return Err(SubdiffError::PointOutside { violation });
    }
    let mut points = Vec::new();
    for (row, &rhs) in set.c.iter().zip(&set.d) {
        let value: f64 = row.iter().zip(u).map(|(a, v)| a * v).sum();
        if value >= rhs - tol * (1.0 + rhs.abs()) {
            points.push(row.clone());
        }
    }
    Ok(GeneratorSet::conic(points))
}

/// Which gradient limits define the state-constraint subdifferential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateDiffMode {
    /// Limits of gradients taken from all nearby points.
    AllPoints,
    /// Limits taken only along sequences of constraint-violating points
    /// (`h > 0`) — the refined set that sharpens the measure condition.
    ViolatingPoints,
}

/// State-constraint subdifferential at node `k` for the affine constraint
/// `h(t_k, x) = d_k·x + e_k`.
///
/// With all-points limits the gradient is constantly `d_k`, so the set is
/// `{d_k}`. With violating-points limits: if `d_k != 0`, every neighborhood
/// of any `x` contains points with `h > 0`, so the set is still `{d_k}`; if
/// `d_k = 0`, the gradient is zero and points with `h > 0` exist exactly
/// when `e_k > 0` — the set is `{0}` then, and empty when `e_k <= 0`.
pub fn state_subdiff(
    problem: &LcProblem,
    k: usize,
    _x: &[f64],
    mode: StateDiffMode,
) -> GeneratorSet {
    let d = problem.constraint_d.get(k).clone();
    let e = *problem.constraint_e.get(k);
    let d_is_zero = d.iter().all(|&v| v == 0.0);
    match mode {
        StateDiffMode::AllPoints => GeneratorSet::convex(vec![d]),
        StateDiffMode::ViolatingPoints => {
            if !d_is_zero || e > 0.0 {
                GeneratorSet::convex(vec![d])
            } else {
                GeneratorSet::convex(Vec::new())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linprog::{solve_lp, LpOutcome, LpProblem, LpSettings, Relation};
    use crate::model::{AffinePiece, Grid};

    fn abs_ma() -> MaxAffine {
        MaxAffine {
            pieces: vec![
                AffinePiece {
                    gradient: vec![1.0],
                    offset: 0.0,
                },
                AffinePiece {
                    gradient: vec![-1.0],
                    offset: 0.0,
                },
            ],
        }
    }

    #[test]
    fn absolute_value_kink_and_smooth_point() {
        let f = abs_ma();
        let at_zero = maxaffine_subdiff(&f, &[0.0], 1e-7).unwrap();
        assert_eq!(at_zero.points, vec![vec![1.0], vec![-1.0]]);
        let at_two = maxaffine_subdiff(&f, &[2.0], 1e-7).unwrap();
        assert_eq!(at_two.points, vec![vec![1.0]]);
    }

    #[test]
    fn inactive_piece_is_excluded() {
        // max(2t+1, -t+1, t) at 0: third piece has value 0 < 1.
        let f = MaxAffine {
            pieces: vec![
                AffinePiece {
                    gradient: vec![2.0],
                    offset: 1.0,
                },
                AffinePiece {
                    gradient: vec![-1.0],
                    offset: 1.0,
                },
                AffinePiece {
                    gradient: vec![1.0],
                    offset: 0.0,
                },
            ],
        };
        let set = maxaffine_subdiff(&f, &[0.0], 1e-7).unwrap();
        assert_eq!(set.points, vec![vec![2.0], vec![-1.0]]);
    }

    #[test]
    fn sum_of_two_kinks_keeps_duplicates() {
        // |t| + |t| at 0: sums {1,-1}+{1,-1} in order.
        let f = PwaSum {
            terms: vec![abs_ma(), abs_ma()],
        };
        let set = pwasum_subdiff(&f, &[0.0], 1e-7, DEFAULT_GENERATOR_BOUND).unwrap();
        let flat: Vec<f64> = set.points.iter().map(|p| p[0]).collect();
        assert_eq!(flat, vec![2.0, 0.0, 0.0, -2.0]);
    }

    #[test]
    fn kink_plus_smooth_term_shifts_the_interval() {
        // |t| + 3t at 0: hull [2, 4].
        let mut smooth = abs_ma();
        smooth.pieces.truncate(1);
        smooth.pieces[0].gradient = vec![3.0];
        let f = PwaSum {
            terms: vec![abs_ma(), smooth],
        };
        let set = pwasum_subdiff(&f, &[0.0], 1e-7, DEFAULT_GENERATOR_BOUND).unwrap();
        let mut flat: Vec<f64> = set.points.iter().map(|p| p[0]).collect();
        flat.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(flat, vec![2.0, 4.0]);
    }

    #[test]
    fn generator_budget_overflows_loudly() {
        let f = PwaSum {
            terms: vec![abs_ma(); 13], // 2^13 = 8192 > 4096
        };
        match pwasum_subdiff(&f, &[0.0], 1e-7, DEFAULT_GENERATOR_BOUND) {
            Err(SubdiffError::GeneratorOverflow { needed, bound }) => {
                assert!(needed > bound);
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn box_normal_cone_by_position() {
        // Box [-1, 1] as rows u <= 1, -u <= 1.
        let set = Polytope {
            dim: 1,
            c: vec![vec![1.0], vec![-1.0]],
            d: vec![1.0, 1.0],
        };
        assert!(normal_cone(&set, &[0.0], 1e-7).unwrap().is_empty());
        assert_eq!(
            normal_cone(&set, &[1.0], 1e-7).unwrap().points,
            vec![vec![1.0]]
        );
        assert!(matches!(
            normal_cone(&set, &[1.5], 1e-7),
            Err(SubdiffError::PointOutside { .. })
        ));
    }

    #[test]
    fn simplex_vertex_normals_include_the_equality_pair() {
        // W = {w >= 0, w1 + w2 = 1} at (1, 0): active rows are -w2 <= 0 and
        // both orientations of the equality.
        let set = Polytope {
            dim: 2,
            c: vec![
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
                vec![1.0, 1.0],
                vec![-1.0, -1.0],
            ],
            d: vec![0.0, 0.0, 1.0, -1.0],
        };
        let cone = normal_cone(&set, &[1.0, 0.0], 1e-7).unwrap();
        assert_eq!(
            cone.points,
            vec![vec![0.0, -1.0], vec![1.0, 1.0], vec![-1.0, -1.0]]
        );
    }

    fn constraint_only_problem(d: Vec<f64>, e: f64) -> LcProblem {
        // Minimal 1-state, 1-control shell carrying the state constraint.
        let n = d.len();
        LcProblem::new(
            Grid::new(0.0, 1.0, 2).unwrap(),
            crate::model::PerNode::Constant(vec![vec![0.0; n]; n]),
            crate::model::PerNode::Constant(vec![vec![0.0]; n]),
            crate::model::PerNode::Constant(d),
            crate::model::PerNode::Constant(e),
            crate::model::PerNode::Constant(PwaSum { terms: vec![] }),
            PwaSum { terms: vec![] },
            crate::model::PerNode::Constant(Polytope {
                dim: 1,
                c: vec![vec![1.0], vec![-1.0]],
                d: vec![1.0, 1.0],
            }),
            Polytope {
                dim: 2 * n,
                c: vec![],
                d: vec![],
            },
            crate::model::PerNode::Constant(vec![vec![0.0]]),
        )
    }

    #[test]
    fn state_gradient_sets_for_affine_constraints() {
        // h = -x - 1: gradient {-1} in both modes at any point.
        let p = constraint_only_problem(vec![-1.0], -1.0);
        for mode in [StateDiffMode::AllPoints, StateDiffMode::ViolatingPoints] {
            let s = state_subdiff(&p, 0, &[3.0], mode);
            assert_eq!(s.points, vec![vec![-1.0]]);
        }
        // d = 0, e = -1: h is constantly negative, no violating sequences.
        let p = constraint_only_problem(vec![0.0], -1.0);
        assert!(!state_subdiff(&p, 1, &[0.0], StateDiffMode::AllPoints).is_empty());
        assert!(state_subdiff(&p, 1, &[0.0], StateDiffMode::ViolatingPoints).is_empty());
        // d = 0, e = 2: h constantly positive, gradient limit {0} exists.
        let p = constraint_only_problem(vec![0.0], 2.0);
        let s = state_subdiff(&p, 0, &[0.0], StateDiffMode::ViolatingPoints);
        assert_eq!(s.points, vec![vec![0.0]]);
    }

    #[test]
    fn zero_gradient_lies_in_subdiff_at_lp_found_minimizers() {
        // For random max-affine f, minimize via the epigraph LP, then check
        // that 0 is a convex combination of the active gradients at the
        // minimizer — solved as a small feasibility LP.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let dim = rng.gen_range(1..=2usize);
            let npieces = rng.gen_range(2..=4usize);
            let f = MaxAffine {
                pieces: (0..npieces)
                    .map(|_| AffinePiece {
                        gradient: (0..dim).map(|_| rng.gen_range(-3..=3) as f64).collect(),
                        offset: rng.gen_range(-2..=2) as f64,
                    })
                    .collect(),
            };
            // minimize s subject to s >= g·z + o on a box large enough that
            // an interior minimizer exists when one does; skip instances
            // whose minimizer sits on the box boundary.
            let mut lp = LpProblem::minimize(
                std::iter::repeat(0.0)
                    .take(dim)
                    .chain(std::iter::once(1.0))
                    .collect(),
            );
            for piece in &f.pieces {
                let mut row: Vec<f64> = piece.gradient.clone();
                row.push(-1.0);
                lp.push_row(row, Relation::Le, -piece.offset);
            }
            for j in 0..dim {
                lp.set_bounds(j, Some(-50.0), Some(50.0));
            }
            lp.set_bounds(dim, None, None);
            let LpOutcome::Optimal { x, .. } = solve_lp(&lp, &LpSettings::default()).unwrap()
            else {
                panic!("epigraph LP must be solvable");
            };
            let z = &x[..dim];
            if z.iter().any(|v| v.abs() > 49.0) {
                continue; // unbounded-below instance clipped by the box
            }
            let fz = f.eval(z);
            let set = maxaffine_subdiff(&f, z, 1e-7 * (1.0 + fz.abs())).unwrap();
            // Feasibility LP: convex weights over generators reproducing 0.
            let k = set.points.len();
            let mut hull = LpProblem::minimize(vec![0.0; k]);
            for j in 0..dim {
                let row: Vec<f64> = set.points.iter().map(|g| g[j]).collect();
                hull.push_row(row, Relation::Eq, 0.0);
            }
            hull.push_row(vec![1.0; k], Relation::Eq, 1.0);
            for w in 0..k {
                hull.set_bounds(w, Some(0.0), None);
            }
            match solve_lp(&hull, &LpSettings::default()).unwrap() {
                LpOutcome::Optimal { .. } => {}
                other => panic!("0 not in subdifferential hull at minimizer: {other:?}"),
            }
        }
    }

    #[test]
    fn shrinking_tolerance_never_adds_generators() {
        let f = MaxAffine {
            pieces: vec![
                AffinePiece {
                    gradient: vec![1.0],
                    offset: 0.0,
                },
                AffinePiece {
                    gradient: vec![-1.0],
                    offset: 1e-8,
                },
            ],
        };
        let wide = maxaffine_subdiff(&f, &[0.0], 1e-6).unwrap();
        let narrow = maxaffine_subdiff(&f, &[0.0], 1e-12).unwrap();
        assert!(narrow.points.len() <= wide.points.len());
        for p in &narrow.points {
            assert!(wide.points.contains(p));
        }
    }
}
