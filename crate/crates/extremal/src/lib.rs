//! Certification engine for candidate extremals of state-constrained
//! linear-convex optimal control problems.
//!
//! The crate decides, for a discretized problem and a candidate
//! state/control trajectory, whether verified multipliers for the
//! constrained maximum principle exist — and when they do not, produces an
//! auditable infeasibility certificate refuting extremality. A direct
//! transcription solver and a penalization laboratory provide independent
//! cross-checks.

pub mod certify;
pub mod direct;
pub mod example_l;
pub mod files;
pub mod linprog;
pub mod model;
pub mod penalab;
pub mod report;
pub mod selftest;
pub mod subdiff;
pub mod testbed;
