use serde::Serialize;

use super::lad::{apply_linear, weighted_lad};
use super::single_target;
use crate::aid::{AggregatedInstance, Fitted, ProblemDefinition};
use crate::error::{Error, Result};
use crate::linalg::DataMatrix;

pub const DEFAULT_SUBSET_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetSolution {
    pub support: Vec<usize>,
    /// Full-length coefficients, zero off the support.
    pub coefficients: Vec<f64>,
    pub objective: f64,
}

impl Fitted for SubsetSolution {
    fn objective(&self) -> f64 {
        self.objective
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u64)? / (i as u64 + 1);
    }
    Some(acc)
}

/// Advances `idx` to the next `p`-combination of `0..m` in lexicographic
/// order; returns false after the last one.
fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let p = idx.len();
    let Some(i) = (0..p).rev().find(|&i| idx[i] != i + m - p) else {
        return false;
    };
    idx[i] += 1;
    for j in (i + 1)..p {
        idx[j] = idx[j - 1] + 1;
    }
    true
}

/// Best weighted LAD fit using exactly `p` features, by enumerating every
/// support. The first support in lexicographic order wins ties.
pub fn solve_subset_selection(
    agg: &AggregatedInstance,
    p: usize,
    cap: u64,
) -> Result<SubsetSolution> {
    let m = agg.a_agg.cols();
    if p == 0 || p > m {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p <= {m}, got {p}"
        )));
    }
    let count = binomial(m, p).unwrap_or(u64::MAX);
    if count > cap {
        return Err(Error::TooLarge(format!(
            "{count} supports of size {p} out of {m} exceed the cap of {cap}"
        )));
    }
    let b = single_target(agg)?;
    let w = agg.weights_f64();
    let mut support: Vec<usize> = (0..p).collect();
    let mut best: Option<SubsetSolution> = None;
    loop {
        let sub = agg.a_agg.select_columns(&support)?;
        let fit = weighted_lad(&sub, &b, &w)?;
        let better = best.as_ref().is_none_or(|s| fit.objective < s.objective);
        if better {
            let mut coefficients = vec![0.0; m];
            for (&j, &c) in support.iter().zip(&fit.coefficients) {
                coefficients[j] = c;
            }
            best = Some(SubsetSolution {
                support: support.clone(),
                coefficients,
                objective: fit.objective,
            });
        }
        if !next_combination(&mut support, m) {
            break;
        }
    }
    Ok(best.expect("at least one support"))
}

/// LAD regression with the cardinality constraint `||x||_0 = p`.
#[derive(Debug, Clone, Copy)]
pub struct SubsetProblem {
    pub p: usize,
    pub cap: u64,
}

impl SubsetProblem {
    pub fn new(p: usize) -> Self {
        SubsetProblem {
            p,
            cap: DEFAULT_SUBSET_CAP,
        }
    }
}

impl ProblemDefinition for SubsetProblem {
    type Solution = SubsetSolution;

    fn name(&self) -> &'static str {
        "subset"
    }

    fn apply(&self, solution: &SubsetSolution, a: &DataMatrix) -> Result<DataMatrix> {
        apply_linear(&solution.coefficients, a)
    }

    fn solve_weighted(&self, agg: &AggregatedInstance) -> Result<SubsetSolution> {
        solve_subset_selection(agg, self.p, self.cap)
    }
}
