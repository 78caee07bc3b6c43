use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DataMatrix;

/// A partition of row indices `0..n` into non-empty, sorted clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    n: usize,
    clusters: Vec<Vec<usize>>,
    iteration: usize,
}

impl ClusterPartition {
    /// Validates and normalizes (sorts) the given clusters.
    pub fn new(n: usize, mut clusters: Vec<Vec<usize>>) -> Result<Self> {
        clusters.iter_mut().for_each(|c| c.sort_unstable());
        let p = ClusterPartition {
            n,
            clusters,
            iteration: 0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn singletons(n: usize) -> Self {
        ClusterPartition {
            n,
            clusters: (0..n).map(|i| vec![i]).collect(),
            iteration: 0,
        }
    }

    pub fn single_cluster(n: usize) -> Result<Self> {
        ClusterPartition::new(n, vec![(0..n).collect()])
    }

    /// Groups rows by label; clusters are ordered by ascending label and
    /// labels that never occur are skipped.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let mut clusters = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            clusters[l].push(i);
        }
        clusters.retain(|c| !c.is_empty());
        ClusterPartition::new(labels.len(), clusters)
    }

    pub(crate) fn from_parts_unchecked(
        n: usize,
        clusters: Vec<Vec<usize>>,
        iteration: usize,
    ) -> Self {
        ClusterPartition {
            n,
            clusters,
            iteration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidPartition("no rows".into()));
        }
        let mut seen = vec![false; self.n];
        for (k, c) in self.clusters.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::InvalidPartition(format!("cluster {k} is empty")));
            }
            for &i in c {
                if i >= self.n {
                    return Err(Error::InvalidPartition(format!(
                        "row {i} out of range for n = {}",
                        self.n
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidPartition(format!("row {i} appears twice")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!(
                "row {missing} is not covered"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_all_singletons(&self) -> bool {
        self.clusters.len() == self.n
    }

    /// Cluster index of every row.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n];
        for (k, c) in self.clusters.iter().enumerate() {
            for &i in c {
                labels[i] = k;
            }
        }
        labels
    }

    /// The row-averaging matrix `W` (`|K| x n`) with `1/|C_k|` on members.
    pub fn averaging_matrix(&self) -> DataMatrix {
        let mut w = DataMatrix::zeros(self.len(), self.n);
        for (k, c) in self.clusters.iter().enumerate() {
            let v = 1.0 / c.len() as f64;
            for &i in c {
                w.set(k, i, v);
            }
        }
        w
    }
}
