//! Desk-scale toolkit for multiobjective bilevel programs with parametric
//! linear lower levels.
//!
//! The crate computes frontier maps and efficient-solution sets of the
//! lower-level problem, runs numerical checks for the constraint
//! qualifications that certify the generalized value-function CQ, and
//! certifies (or refutes, with Farkas vectors) the KKT-type stationarity
//! system at candidate points.
//!
//! Module map:
//! - [`model`]: problem data, dominance predicates, efficiency filters.
//! - [`polyhedra`]: LP solver, vertex enumeration, projections, NNLS.
//! - [`pareto`]: exact frontier map and efficient-solution mapping.
//! - [`cq`]: constraint-qualification checkers behind a named registry.
//! - [`stationarity`]: KKT-type certificates and the coderivative form.
//! - [`oracle`]: independent grid-based ground truth.
//! - [`cli`]: problem-file ingestion, dispatch, and report emission.

pub mod cli;
pub mod cq;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod pareto;
pub mod polyhedra;
pub mod stationarity;

mod tolerances;

pub use tolerances::Tolerances;

use thiserror::Error;

/// Crate-wide error type.
///
/// Numerical statuses that are legitimate answers (infeasible polyhedron,
/// unbounded LP, `Violated` verdicts) are *not* errors; only contract
/// violations and resource-guard hits end up here.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("polyhedron is infeasible")]
    Infeasible,
    #[error("polyhedron or LP is unbounded")]
    Unbounded,
    #[error("iteration limit exceeded in {0}")]
    IterationLimit(&'static str),
    #[error("size guard exceeded: {0}")]
    GuardExceeded(String),
    #[error("exact path unsupported: {0}")]
    Unsupported(String),
    #[error("vacuous sample: {0}")]
    VacuousSample(String),
    #[error("candidate infeasible: {0}")]
    InfeasibleCandidate(String),
    #[error("problem file error at `{path}`: {message}")]
    ProblemFile { path: String, message: String },
    #[error("unknown tolerance `{0}`")]
    UnknownTolerance(String),
}

pub type Result<T> = std::result::Result<T, Error>;
