//! On-disk JSON schemas for problems and processes.
//!
//! A problem file is a UTF-8 JSON document with exactly these fields
//! (unknown fields are rejected everywhere):
//!
//! ```json
//! {
//!   "grid": {"a": 0.0, "b": 2.0, "N": 16},
//!   "dynamics": {"A": [[0.0]], "B": [[1.0]]},
//!   "state_constraint": {"d": [-1.0], "e": 0.0},
//!   "running_cost": [{"pieces": [{"gradient": [1.0, 0.0], "offset": 0.0}]}],
//!   "endpoint_cost": [],
//!   "control_set": {"dim": 1, "C": [[1.0], [-1.0]], "d": [1.0, 1.0]},
//!   "endpoint_set": {"dim": 2, "C": [[1.0, 0.0], [-1.0, 0.0]], "d": [1.0, -1.0]},
//!   "weierstrass_samples": [[-1.0], [1.0]]
//! }
//! ```
//!
//! `A` is the n-by-n state matrix and `B` the n-by-m control matrix of
//! `x' = A x + B u`; the state constraint is `d . x + e <= 0` at every
//! node. Cost entries are max-affine terms: the running cost's gradients
//! have length `n + m` over `(x, u)`, the endpoint cost's length `2 n`
//! over `(x(a), x(b))`, and an empty term list is the zero function.
//! Polytopes are row systems `C z <= d` with an explicit dimension;
//! `endpoint_set` constrains the stacked `(x(a), x(b))`.
//! `weierstrass_samples` (optional, default empty) lists extra control
//! points for the pointwise-maximization audit — the control polytope's
//! vertices are always sampled, so the list is enrichment only. All data
//! is constant in time.
//!
//! A process file holds states at the `N + 1` nodes and controls on the
//! `N` intervals:
//!
//! ```json
//! {"x": [[1.0], [0.5]], "u": [[-1.0]]}
//! ```
//!
//! Parsing validates structure (dimensions, finiteness, convexity of the
//! sets) but deliberately not admissibility: files describing a candidate
//! that violates its constraints parse fine, and the engine then reports
//! that violation as a verdict rather than a parse error.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::model::{Grid, LcProblem, MaxAffine, ModelError, PerNode, Polytope, Process, PwaSum};

/// Errors from reading or writing problem and process files.
#[derive(Debug)]
pub enum FilesError {
    /// The document is not valid JSON for the schema, or its contents
    /// fail structural validation.
    Malformed(String),
    /// The in-memory problem cannot be expressed in the file schema
    /// (time-varying data).
    Unrepresentable(String),
}

impl fmt::Display for FilesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilesError::Malformed(msg) => write!(f, "malformed file: {msg}"),
            FilesError::Unrepresentable(msg) => {
                write!(f, "unrepresentable problem: {msg}")
            }
        }
    }
}

impl std::error::Error for FilesError {}

impl From<ModelError> for FilesError {
    fn from(e: ModelError) -> Self {
        FilesError::Malformed(e.to_string())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    a: f64,
    b: f64,
    #[serde(rename = "N")]
    n_steps: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    d: Vec<f64>,
    e: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    grid: GridFile,
    dynamics: DynamicsFile,
    state_constraint: ConstraintFile,
    running_cost: Vec<MaxAffine>,
    endpoint_cost: Vec<MaxAffine>,
    control_set: Polytope,
    endpoint_set: Polytope,
    #[serde(default)]
    weierstrass_samples: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcessFile {
    x: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
}

/// Parses and structurally validates a problem document.
pub fn parse_problem(text: &str) -> Result<LcProblem, FilesError> {
    let file: ProblemFile =
        serde_json::from_str(text).map_err(|e| FilesError::Malformed(e.to_string()))?;
    let grid = Grid::new(file.grid.a, file.grid.b, file.grid.n_steps)?;
    let problem = LcProblem::new(
        grid,
        PerNode::Constant(file.dynamics.a),
        PerNode::Constant(file.dynamics.b),
        PerNode::Constant(file.state_constraint.d),
        PerNode::Constant(file.state_constraint.e),
        PerNode::Constant(PwaSum {
            terms: file.running_cost,
        }),
        PwaSum {
            terms: file.endpoint_cost,
        },
        PerNode::Constant(file.control_set),
        file.endpoint_set,
        PerNode::Constant(file.weierstrass_samples),
    );
    problem.validate(1e-7)?;
    Ok(problem)
}

/// Parses a process document. Dimensions are checked against a problem
/// by the engine entry points, not here.
pub fn parse_process(text: &str) -> Result<Process, FilesError> {
    let file: ProcessFile =
        serde_json::from_str(text).map_err(|e| FilesError::Malformed(e.to_string()))?;
    let finite = |rows: &[Vec<f64>]| rows.iter().flatten().all(|v| v.is_finite());
    if !finite(&file.x) || !finite(&file.u) {
        return Err(FilesError::Malformed(
            "process contains non-finite entries".to_string(),
        ));
    }
    Ok(Process {
        x: file.x,
        u: file.u,
    })
}

fn constant_of<T: Clone + PartialEq>(per_node: &PerNode<T>, what: &str) -> Result<T, FilesError> {
    match per_node {
        PerNode::Constant(v) => Ok(v.clone()),
        PerNode::Each(vs) => {
            let first = vs.first().ok_or_else(|| {
                FilesError::Unrepresentable(format!("{what}: empty per-node list"))
            })?;
            if vs.iter().all(|v| v == first) {
                Ok(first.clone())
            } else {
                Err(FilesError::Unrepresentable(format!(
                    "{what} varies over the grid; the file schema holds \
                     constant-in-time data only"
                )))
            }
        }
    }
}

/// Renders a problem in the file schema (17-significant-digit floats).
///
/// Only constant-in-time problems are representable; per-node data that
/// actually varies is refused.
pub fn problem_to_json(problem: &LcProblem) -> Result<String, FilesError> {
    let file = ProblemFile {
        grid: GridFile {
            a: problem.grid.a,
            b: problem.grid.b,
            n_steps: problem.grid.n_steps,
        },
        dynamics: DynamicsFile {
            a: constant_of(&problem.a_mat, "dynamics state matrix")?,
            b: constant_of(&problem.b_mat, "dynamics control matrix")?,
        },
        state_constraint: ConstraintFile {
            d: constant_of(&problem.constraint_d, "state-constraint gradient")?,
            e: constant_of(&problem.constraint_e, "state-constraint offset")?,
        },
        running_cost: constant_of(&problem.running_cost, "running cost")?.terms,
        endpoint_cost: problem.endpoint_cost.terms.clone(),
        control_set: constant_of(&problem.control_set, "control set")?,
        endpoint_set: problem.endpoint_set.clone(),
        weierstrass_samples: constant_of(&problem.weierstrass_samples, "control samples")?,
    };
    Ok(crate::report::to_json_pretty(&file))
}

/// Renders a process in the file schema (17-significant-digit floats).
pub fn process_to_json(process: &Process) -> String {
    crate::report::to_json_pretty(&ProcessFile {
        x: process.x.clone(),
        u: process.u.clone(),
    })
}
