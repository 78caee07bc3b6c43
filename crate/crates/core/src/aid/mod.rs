//! The problem-independent AID engine.
//!
//! [`run_aid`] alternates between solving a weighted problem on cluster means
//! and checking, on the original rows, whether every cluster's residual sign
//! pattern is uniform. Clusters that disagree are split in two until the
//! condition holds, the gap closes, or every row is its own cluster.

mod aggregate;
mod driver;
mod partition;
mod signs;

pub use aggregate::{aggregate, AggregatedInstance};
pub use driver::{
    check_trace, optimality_gap, run_aid, AidConfig, AidReport, Fitted, IterationRecord,
    ProblemDefinition, Sense, Termination, BOUND_SLACK,
};
pub use partition::ClusterPartition;
pub use signs::{check_optimality, decluster, residual_signs, OptimalityCheck, SignPattern};
