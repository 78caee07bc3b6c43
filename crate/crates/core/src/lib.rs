//! Aggregate-and-iterative-disaggregate (AID) optimization for L1-norm
//! fitting problems.
//!
//! The crate bundles a problem-independent AID driver ([`aid`]), exact
//! solvers for the supported fitting problems ([`problems`]), initial
//! clustering ([`clustering`]), instance generation and I/O ([`data`]) and the
//! experiment harness used by the `aid` command-line tool ([`harness`]).

// `!(x >= 0.0)` style checks reject NaN on purpose, and index loops mirror
// the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod aid;
pub mod clustering;
pub mod data;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lp;
pub mod problems;

pub use aid::{
    run_aid, AggregatedInstance, AidConfig, AidReport, ClusterPartition, ProblemDefinition, Sense,
    Termination,
};
pub use error::{Error, Result};
pub use linalg::DataMatrix;
