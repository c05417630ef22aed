//! Covariate-balancing assignment of patients to treatment arms.
//!
//! The crate minimizes a min-max covariate-imbalance objective over
//! size-balanced assignments and provides the diagnostics around it:
//!
//! - [`cohort`]: patients, schemas, assignments and the feasible set;
//! - [`metrics`]: SMD, total variation and the imbalance objective;
//! - [`exact`], [`heuristic`], [`qubo`]: solver backends;
//! - [`baseline`]: the objective's distribution under randomization;
//! - [`survival`]: the two-sample log-rank test;
//! - [`sensitivity`]: greedy patient-removal sensitivity traces;
//! - [`io`] and [`cli`]: data loading, reports and the command-line tool.

pub mod baseline;
pub mod cli;
pub mod cohort;
pub mod error;
pub mod exact;
pub mod heuristic;
pub mod io;
pub mod metrics;
mod model;
pub mod qubo;
pub mod rng;
pub mod sensitivity;
mod solve;
pub mod survival;
pub mod synthetic;

pub use cohort::{
    assignment_from_arm_column, validate_assignment, Assignment, AssignmentConstraints, Cohort,
    Covariate, CovariateKind, CovariateSchema, Patient, Validation, Violation,
};
pub use error::{Error, Result};
pub use metrics::{CovariateScale, DiscrepancyReport, ObjectiveConfig};
pub use solve::SolveResult;
