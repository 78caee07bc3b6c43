use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;

use super::{ClusterPartition, ProblemDefinition};
use crate::error::{Error, Result};
use crate::linalg::DataMatrix;

/// Residual signs of one row across the target columns.
///
/// Ordered lexicographically with `+1` before `-1` in every coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SignPattern(pub Vec<i8>);

impl SignPattern {
    pub fn signs(&self) -> &[i8] {
        &self.0
    }
}

impl Ord for SignPattern {
    fn cmp(&self, other: &Self) -> Ordering {
        // -1 sorts after +1, so compare on "is negative".
        self.0
            .iter()
            .map(|&s| s < 0)
            .cmp(other.0.iter().map(|&s| s < 0))
    }
}

impl PartialOrd for SignPattern {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sign of `B - F` per row; residuals at or above `-eps_sign` count as `+1`.
pub fn residual_signs(b: &DataMatrix, f: &DataMatrix, eps_sign: f64) -> Result<Vec<SignPattern>> {
    if b.shape() != f.shape() {
        return Err(Error::mismatch("residual_signs", b.shape(), f.shape()));
    }
    Ok((0..b.rows())
        .map(|i| {
            SignPattern(
                b.row(i)
                    .iter()
                    .zip(f.row(i))
                    .map(|(x, y)| if x - y >= -eps_sign { 1 } else { -1 })
                    .collect(),
            )
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct OptimalityCheck {
    pub satisfied: bool,
    pub violating: Vec<usize>,
    pub signs: Vec<SignPattern>,
}

pub(crate) fn violating_clusters(
    partition: &ClusterPartition,
    signs: &[SignPattern],
) -> Vec<usize> {
    partition
        .clusters()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.iter().any(|&i| signs[i] != signs[c[0]]))
        .map(|(k, _)| k)
        .collect()
}

/// Checks whether every cluster's rows share one residual sign pattern
/// under the given solution.
pub fn check_optimality<P: ProblemDefinition>(
    b: &DataMatrix,
    a: &DataMatrix,
    problem: &P,
    solution: &P::Solution,
    partition: &ClusterPartition,
    eps_sign: f64,
) -> Result<OptimalityCheck> {
    if b.rows() != partition.n() {
        return Err(Error::mismatch(
            "check_optimality",
            b.shape(),
            (partition.n(), 0),
        ));
    }
    let f = problem.apply(solution, a)?;
    let signs = residual_signs(b, &f, eps_sign)?;
    let violating = violating_clusters(partition, &signs);
    Ok(OptimalityCheck {
        satisfied: violating.is_empty(),
        violating,
        signs,
    })
}

/// Splits each violating cluster into the rows carrying its most frequent
/// sign pattern and the rest. Ties go to the smallest pattern.
pub fn decluster(
    partition: &ClusterPartition,
    signs: &[SignPattern],
    violating: &[usize],
) -> Result<ClusterPartition> {
    if signs.len() != partition.n() {
        return Err(Error::mismatch(
            "decluster",
            (signs.len(), 1),
            (partition.n(), 1),
        ));
    }
    let mut split = vec![false; partition.len()];
    for &k in violating {
        let flag = split.get_mut(k).ok_or_else(|| {
            Error::InvalidArgument(format!("violating cluster {k} does not exist"))
        })?;
        *flag = true;
    }
    let mut clusters = Vec::with_capacity(partition.len() + violating.len());
    for (k, cluster) in partition.clusters().iter().enumerate() {
        if !split[k] {
            clusters.push(cluster.clone());
            continue;
        }
        let mut counts: BTreeMap<&SignPattern, usize> = BTreeMap::new();
        for &i in cluster {
            *counts.entry(&signs[i]).or_default() += 1;
        }
        if counts.len() < 2 {
            return Err(Error::Internal(format!(
                "cluster {k} was flagged as violating but has a single sign pattern"
            )));
        }
        // BTreeMap iterates patterns in ascending order, so the first maximum
        // is the smallest among tied modes.
        let mut mode = None;
        let mut best = 0;
        for (pattern, &count) in &counts {
            if count > best {
                best = count;
                mode = Some(*pattern);
            }
        }
        let mode = mode.expect("non-empty cluster");
        let (keep, rest): (Vec<usize>, Vec<usize>) =
            cluster.iter().partition(|&&i| &signs[i] == mode);
        clusters.push(keep);
        clusters.push(rest);
    }
    Ok(ClusterPartition::from_parts_unchecked(
        partition.n(),
        clusters,
        partition.iteration() + 1,
    ))
}
