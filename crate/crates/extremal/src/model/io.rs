//! Problem and process file formats.
//!
//! Problem files are UTF-8 JSON with this shape (fields in any order,
//! unknown fields rejected):
//!
//! ```json
//! {
//!   "grid": {"a": 0.0, "b": 2.0, "N": 16},
//!   "dynamics": {"A": [[0.0]], "B": [[1.0]]},
//!   "state_constraint": {"d": [-1.0], "e": 0.0},
//!   "running_cost": [{"pieces": [{"gradient": [1.0, 0.0], "offset": 0.0}]}],
//!   "endpoint_cost": [],
//!   "control_set": {"C": [[1.0], [-1.0]], "d": [1.0, 1.0]},
//!   "endpoint_set": {"C": [[1.0, 0.0], [-1.0, 0.0]], "d": [1.0, -1.0]},
//!   "weierstrass_samples": [[-1.0], [1.0]]
//! }
//! ```
//!
//! `dynamics.A`, `dynamics.B`, `state_constraint.d`, `state_constraint.e`,
//! and `weierstrass_samples` accept either a single value (held constant)
//! or a list with one entry per interval (`A`, `B`, samples) or per node
//! (`d`, `e`). `running_cost` and `endpoint_cost` are lists of max-affine
//! terms whose values add up; each term is the maximum of its affine
//! pieces. Cost arguments are the concatenated `(x, u)` for the running
//! cost and `(x_first, x_last)` for the endpoint cost. Polytopes are
//! `{z : C z <= d}`; an empty `C` row list means no constraint rows.
//!
//! Process files are `{"x": [[...], ...], "u": [[...], ...]}` with one
//! state vector per node and one control vector per interval.

use std::path::Path;

use super::{Grid, LcProblem, ModelError, PerNode, Polytope, Process, PwaSum};

/// Errors from reading, parsing, or assembling problem and process files.
#[derive(Debug)]
pub enum IoError {
    /// Filesystem failure, with the path.
    Read(String),
    /// JSON syntax or schema violation.
    Parse(String),
    /// Parsed but structurally invalid data.
    Model(ModelError),
}

impl std::fmt::Display for IoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IoError::Read(msg) => write!(f, "cannot read file: {msg}"),
            IoError::Parse(msg) => write!(f, "cannot parse file: {msg}"),
            IoError::Model(e) => write!(f, "invalid data: {e}"),
        }
    }
}

impl std::error::Error for IoError {}

impl From<ModelError> for IoError {
    fn from(e: ModelError) -> Self {
        IoError::Model(e)
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    a: f64,
    b: f64,
    #[serde(rename = "N")]
    n_steps: usize,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsFile {
    #[serde(rename = "A")]
    a: PerNode<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: PerNode<Vec<Vec<f64>>>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct StateConstraintFile {
    d: PerNode<Vec<f64>>,
    e: PerNode<f64>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PolytopeFile {
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    d: Vec<f64>,
}

impl PolytopeFile {
    fn into_polytope(self, dim: usize) -> Polytope {
        Polytope {
            dim,
            c: self.c,
            d: self.d,
        }
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    grid: GridFile,
    dynamics: DynamicsFile,
    state_constraint: StateConstraintFile,
    running_cost: PwaSum,
    endpoint_cost: PwaSum,
    control_set: PolytopeFile,
    endpoint_set: PolytopeFile,
    weierstrass_samples: PerNode<Vec<Vec<f64>>>,
}

#[derive(serde::Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
struct ProcessFile {
    x: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
}

/// Parses a problem document and validates it structurally.
pub fn parse_problem(text: &str) -> Result<LcProblem, IoError> {
    let file: ProblemFile =
        serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    let grid = Grid::new(file.grid.a, file.grid.b, file.grid.n_steps)?;

    // Infer the state dimension from the constraint gradient and the
    // control dimension from the control polytope or the control-coupling
    // matrix.
    let n = file.state_constraint.d.get(0).len();
    let m = if let Some(row) = file.control_set.c.first() {
        row.len()
    } else {
        file.dynamics
            .b
            .get(0)
            .first()
            .map(|row| row.len())
            .ok_or_else(|| {
                IoError::Parse(
                    "cannot infer the control dimension: control_set.C and dynamics.B are both empty"
                        .into(),
                )
            })?
    };

    let problem = LcProblem {
        grid,
        n,
        m,
        a_mat: file.dynamics.a,
        b_mat: file.dynamics.b,
        constraint_d: file.state_constraint.d,
        constraint_e: file.state_constraint.e,
        running_cost: PerNode::Constant(file.running_cost),
        endpoint_cost: file.endpoint_cost,
        control_set: PerNode::Constant(file.control_set.into_polytope(m)),
        endpoint_set: file.endpoint_set.into_polytope(2 * n),
        weierstrass_samples: file.weierstrass_samples,
    };
    problem.validate(1e-7)?;
    Ok(problem)
}

/// Reads and parses a problem file.
pub fn load_problem(path: &Path) -> Result<LcProblem, IoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| IoError::Read(format!("{}: {e}", path.display())))?;
    parse_problem(&text)
}

/// Parses a process document (dimensions are checked later against the
/// problem it is used with).
pub fn parse_process(text: &str) -> Result<Process, IoError> {
    let file: ProcessFile =
        serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))?;
    Ok(Process {
        x: file.x,
        u: file.u,
    })
}

/// Reads and parses a process file.
pub fn load_process(path: &Path) -> Result<Process, IoError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| IoError::Read(format!("{}: {e}", path.display())))?;
    parse_process(&text)
}

/// Serializes a process in the process-file schema with reproducible
/// fixed-precision floats.
pub fn process_to_json(process: &Process) -> String {
    let file = ProcessFile {
        x: process.x.clone(),
        u: process.u.clone(),
    };
    crate::report::to_json_pretty(&file)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RIDING: &str = r#"{
        "grid": {"a": 0.0, "b": 2.0, "N": 4},
        "dynamics": {"A": [[0.0]], "B": [[1.0]]},
        "state_constraint": {"d": [-1.0], "e": 0.0},
        "running_cost": [{"pieces": [{"gradient": [1.0, 0.0], "offset": 0.0}]}],
        "endpoint_cost": [],
        "control_set": {"C": [[1.0], [-1.0]], "d": [1.0, 1.0]},
        "endpoint_set": {"C": [[1.0, 0.0], [-1.0, 0.0]], "d": [1.0, -1.0]},
        "weierstrass_samples": [[-1.0], [1.0]]
    }"#;

    #[test]
    fn parses_the_riding_instance() {
        let p = parse_problem(RIDING).unwrap();
        assert_eq!((p.n, p.m), (1, 1));
        assert_eq!(p.grid.n_steps, 4);
        assert_eq!(p.constraint_d.get(3), &vec![-1.0]);
        assert_eq!(p.running_cost.get(0).terms.len(), 1);
        assert_eq!(p.control_set.get(2).c.len(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let doc = RIDING.replace("\"grid\"", "\"extra\": 1, \"grid\"");
        assert!(matches!(parse_problem(&doc), Err(IoError::Parse(_))));
    }

    #[test]
    fn per_node_constraint_data_parses() {
        let doc = RIDING.replace(r#""e": 0.0"#, r#""e": [0.0, 0.0, 0.0, 0.0, -0.5]"#);
        let p = parse_problem(&doc).unwrap();
        assert_eq!(*p.constraint_e.get(4), -0.5);
        assert_eq!(*p.constraint_e.get(1), 0.0);
        // Wrong length (needs nodes = N + 1) must fail validation.
        let doc = RIDING.replace(r#""e": 0.0"#, r#""e": [0.0, 0.0]"#);
        assert!(parse_problem(&doc).is_err());
    }

    #[test]
    fn process_roundtrip_preserves_values() {
        let p = Process {
            x: vec![vec![1.0], vec![0.625], vec![0.25]],
            u: vec![vec![-0.75], vec![-0.75]],
        };
        let json = process_to_json(&p);
        let back = parse_process(&json).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn malformed_process_is_a_parse_error() {
        assert!(matches!(
            parse_process(r#"{"x": [[0.0]], "u": [[0.0]], "cost": 1.0}"#),
            Err(IoError::Parse(_))
        ));
    }
}
