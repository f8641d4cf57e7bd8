//! Permanence and global attractivity analysis of nonautonomous Nicholson
//! equations with mixed monotone delays.
//!
//! The crate parses coefficient expressions, integrates the delay equation,
//! evaluates the sufficient conditions for permanence and attractivity,
//! analyzes the auxiliary interval map and runs the verification
//! experiments built on them.

// `!(x > 0.0)` is used throughout to reject NaN along with the failing range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod experiments;
pub mod dde;
pub mod expr;
pub mod interval_map;
pub mod model;
pub mod numerics;

pub use criteria::{evaluate, CriteriaOptions, CriteriaReport, Verdict};
pub use experiments::{reproduce_example, ExperimentConfig, ExperimentReport, Status};
pub use dde::{integrate, DdeError, DelayEquation, IntegrateOptions, Trajectory};
pub use expr::{Expression, ParseError};
pub use interval_map::{MapError, MapSpec, OrbitVerdict};
pub use model::{load_model, HistoryFunction, ModelError, NicholsonModel, ScalarField};
