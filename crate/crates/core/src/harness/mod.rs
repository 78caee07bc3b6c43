//! Experiment orchestration behind the `aid` binary: instance loading,
//! direct versus AID runs, comparison metrics and JSON reports.

mod benchmark;
mod instance;
mod report;
mod run;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use benchmark::{
    run_benchmark, write_benchmark, AggregateRow, AidMetrics, BenchmarkConfig, BenchmarkGrid,
    BenchmarkOutcome, BenchmarkSummary, CellMeans, ExperimentResult, GridCell, RunMetrics,
};
pub use instance::{InstanceSource, ProblemData};
pub use report::{
    check_report_invariants, validate_against, write_json, write_solve_report, SolveReport,
    BENCHMARK_SUMMARY_SCHEMA, EXPERIMENT_ROW_SCHEMA, SOLVE_REPORT_SCHEMA,
};
pub use run::{
    default_feature_source, delta, run_problem, AidSummary, ProblemRun, RunConfig, Timings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Lad,
    Subset,
    Sphere,
    L1pca,
    Hyperplane,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 5] = [
        ProblemKind::Lad,
        ProblemKind::Subset,
        ProblemKind::Sphere,
        ProblemKind::L1pca,
        ProblemKind::Hyperplane,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Lad => "lad",
            ProblemKind::Subset => "subset",
            ProblemKind::Sphere => "sphere",
            ProblemKind::L1pca => "l1pca",
            ProblemKind::Hyperplane => "hyperplane",
        }
    }

    /// Regression-type problems need a target column `B`.
    pub fn needs_target(self) -> bool {
        matches!(
            self,
            ProblemKind::Lad | ProblemKind::Subset | ProblemKind::Sphere
        )
    }

    /// Support size for subset selection, component count for L1-PCA.
    pub fn default_p(self) -> Option<usize> {
        match self {
            ProblemKind::Subset => Some(2),
            ProblemKind::L1pca => Some(1),
            _ => None,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown problem id {s:?} (expected lad, subset, sphere, l1pca or hyperplane)"
                ))
            })
    }
}

/// Problem-specific knobs. `p` is ignored by problems that do not use it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub p: Option<usize>,
    /// Bound on the squared coefficient norm for the sphere problem.
    pub radius_sq: f64,
    pub sphere_tol: f64,
    pub subset_cap: u64,
    pub pca_cap: u64,
}

pub const DEFAULT_RADIUS_SQ: f64 = 1000.0;

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            p: None,
            radius_sq: DEFAULT_RADIUS_SQ,
            sphere_tol: crate::problems::DEFAULT_SPHERE_TOL,
            subset_cap: crate::problems::DEFAULT_SUBSET_CAP,
            pca_cap: crate::problems::DEFAULT_PCA_CAP,
        }
    }
}

impl ProblemParams {
    /// `p` for problems that need it, falling back to the problem default.
    pub fn resolved_p(&self, problem: ProblemKind) -> Option<usize> {
        problem.default_p().map(|d| self.p.unwrap_or(d))
    }
}

/// Initial cluster count: a fixed number or the size-based default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ClusterCount {
    #[default]
    Auto,
    Count(usize),
}

impl ClusterCount {
    pub fn resolve(self, n: usize) -> Result<usize> {
        match self {
            ClusterCount::Auto => Ok(crate::clustering::default_cluster_count(n)),
            ClusterCount::Count(k) if k >= 1 && k <= n => Ok(k),
            ClusterCount::Count(k) => Err(Error::InvalidArgument(format!(
                "initial cluster count {k} must lie in [1, {n}]"
            ))),
        }
    }
}

impl fmt::Display for ClusterCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterCount::Auto => f.write_str("auto"),
            ClusterCount::Count(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for ClusterCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(ClusterCount::Auto);
        }
        s.parse().map(ClusterCount::Count).map_err(|_| {
            Error::InvalidArgument(format!("k0 must be a count or \"auto\", got {s:?}"))
        })
    }
}

impl From<ClusterCount> for String {
    fn from(k: ClusterCount) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for ClusterCount {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}
