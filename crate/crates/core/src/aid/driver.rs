use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use super::signs::{residual_signs, violating_clusters};
use super::{aggregate, decluster, AggregatedInstance, ClusterPartition};
use crate::error::{Error, Result};
use crate::linalg::{l1_norm, DataMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A solver output that knows its own objective value.
pub trait Fitted {
    fn objective(&self) -> f64;
}

/// A fitting problem `opt ||B - f(X, A)||_1` that AID can drive.
///
/// `apply` must commute with row averaging, and `solve_weighted` must return
/// an exact optimum of the weighted problem on aggregated data, with its
/// weighted objective.
pub trait ProblemDefinition {
    type Solution: Fitted + Clone + Debug + Serialize;

    fn name(&self) -> &'static str;

    fn sense(&self) -> Sense {
        Sense::Minimize
    }

    fn apply(&self, solution: &Self::Solution, a: &DataMatrix) -> Result<DataMatrix>;

    fn solve_weighted(&self, agg: &AggregatedInstance) -> Result<Self::Solution>;
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AidConfig {
    pub tol: f64,
    pub eps_sign: f64,
    /// Defaults to the number of rows.
    pub max_iters: Option<usize>,
}

impl Default for AidConfig {
    fn default() -> Self {
        AidConfig {
            tol: 0.0,
            eps_sign: 1e-9,
            max_iters: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    OptimalityCondition,
    GapBelowTol,
    FullyDisaggregated,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub cluster_count: usize,
    /// Aggregated optimum.
    #[serde(rename = "F")]
    pub lower_bound: f64,
    /// Original objective of the aggregated solution.
    #[serde(rename = "E")]
    pub objective: f64,
    #[serde(rename = "E_best")]
    pub best_objective: f64,
    #[serde(rename = "delta")]
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AidReport<S> {
    pub problem: String,
    pub sense: Sense,
    pub n: usize,
    pub iterations: Vec<IterationRecord>,
    /// Best incumbent over all iterations.
    pub solution: S,
    pub objective: f64,
    pub termination: Termination,
    pub converged: bool,
    #[serde(rename = "T")]
    pub final_iteration: usize,
    pub final_cluster_count: usize,
    pub r_agg: f64,
    pub final_gap: f64,
}

/// Slack for bound comparisons that are exact in real arithmetic.
pub const BOUND_SLACK: f64 = 1e-9;

/// Relative gap between the incumbent and the aggregated bound. Negative
/// values within `1e-12` are rounding noise from `F = E` and snap to zero.
pub fn optimality_gap(best: f64, bound: f64) -> Result<f64> {
    if best < bound - BOUND_SLACK {
        return Err(Error::LowerBoundViolation { lower: bound, best });
    }
    if best == 0.0 {
        return Ok(0.0);
    }
    let gap = (best - bound) / best;
    Ok(if (-1e-12..0.0).contains(&gap) {
        0.0
    } else {
        gap
    })
}

impl<S> AidReport<S> {
    /// Re-checks the trace; see [`check_trace`].
    pub fn check_invariants(&self) -> Result<()> {
        check_trace(self.sense, &self.iterations)
    }
}

/// Checks a recorded trace: monotone bounds, bound below incumbent, the gap
/// formula and strictly growing cluster counts. For maximization both
/// bounds increase along the run.
pub fn check_trace(sense: Sense, iterations: &[IterationRecord]) -> Result<()> {
    let fail = |msg: String| Err(Error::Internal(msg));
    for (k, rec) in iterations.iter().enumerate() {
        if rec.lower_bound > rec.best_objective + BOUND_SLACK {
            return fail(format!("iteration {}: F above E_best", rec.t));
        }
        let expected = if rec.best_objective == 0.0 {
            0.0
        } else {
            (rec.best_objective - rec.lower_bound) / rec.best_objective
        };
        if (rec.gap - expected).abs() > 1e-12 {
            return fail(format!(
                "iteration {}: gap does not match its bounds",
                rec.t
            ));
        }
        if k == 0 {
            continue;
        }
        let prev = &iterations[k - 1];
        if rec.lower_bound < prev.lower_bound - BOUND_SLACK {
            return fail(format!("iteration {}: F decreased", rec.t));
        }
        let regress = match sense {
            Sense::Minimize => rec.best_objective > prev.best_objective,
            Sense::Maximize => rec.best_objective < prev.best_objective,
        };
        if regress {
            return fail(format!("iteration {}: E_best moved the wrong way", rec.t));
        }
        if rec.cluster_count <= prev.cluster_count {
            return fail(format!("iteration {}: cluster count did not grow", rec.t));
        }
    }
    Ok(())
}

/// Runs the aggregate / solve / check / decluster loop.
pub fn run_aid<P: ProblemDefinition>(
    b: &DataMatrix,
    a: &DataMatrix,
    problem: &P,
    initial: &ClusterPartition,
    config: &AidConfig,
) -> Result<AidReport<P::Solution>> {
    if b.rows() != a.rows() || a.rows() != initial.n() {
        return Err(Error::mismatch("run_aid", b.shape(), a.shape()));
    }
    if !(config.tol >= 0.0) || !(config.eps_sign >= 0.0) {
        return Err(Error::InvalidArgument(
            "tol and eps_sign must be nonnegative".into(),
        ));
    }
    initial.validate()?;
    let n = b.rows();
    let max_iters = config.max_iters.unwrap_or(n).max(1);
    let sense = problem.sense();

    let mut partition = initial.clone();
    let mut records = Vec::new();
    let mut best: Option<(P::Solution, f64)> = None;
    let mut t = 1;
    loop {
        partition.validate()?;
        let agg = aggregate(b, a, &partition)?;
        let solution = problem.solve_weighted(&agg)?;
        let bound = solution.objective();
        let fitted = problem.apply(&solution, a)?;
        let objective = l1_norm(&b.sub(&fitted)?);

        let improves = match (&best, sense) {
            (None, _) => true,
            (Some((_, e)), Sense::Minimize) => objective < *e,
            (Some((_, e)), Sense::Maximize) => objective > *e,
        };
        let signs = residual_signs(b, &fitted, config.eps_sign)?;
        if improves {
            best = Some((solution, objective));
        }
        let best_objective = best.as_ref().map(|(_, e)| *e).expect("set above");
        let gap = optimality_gap(best_objective, bound)?;
        records.push(IterationRecord {
            t,
            cluster_count: partition.len(),
            lower_bound: bound,
            objective,
            best_objective,
            gap,
        });

        let violating = violating_clusters(&partition, &signs);
        let termination = if partition.is_all_singletons() {
            Some(Termination::FullyDisaggregated)
        } else if violating.is_empty() {
            Some(Termination::OptimalityCondition)
        } else if gap <= config.tol {
            Some(Termination::GapBelowTol)
        } else if t >= max_iters {
            Some(Termination::IterationLimit)
        } else {
            None
        };
        if let Some(termination) = termination {
            let (solution, objective) = best.expect("at least one iteration");
            return Ok(AidReport {
                problem: problem.name().to_string(),
                sense,
                n,
                iterations: records,
                solution,
                objective,
                termination,
                converged: termination != Termination::IterationLimit,
                final_iteration: t,
                final_cluster_count: partition.len(),
                r_agg: partition.len() as f64 / n as f64,
                final_gap: gap,
            });
        }
        partition = decluster(&partition, &signs, &violating)?;
        t += 1;
    }
}
