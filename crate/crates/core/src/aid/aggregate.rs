use serde::Serialize;

use super::ClusterPartition;
use crate::error::{Error, Result};
use crate::linalg::DataMatrix;

/// Cluster means of the target and feature data plus cluster sizes.
#[derive(Debug, Clone, Serialize)]
pub struct AggregatedInstance {
    pub b_agg: DataMatrix,
    pub a_agg: DataMatrix,
    pub weights: Vec<usize>,
}

impl AggregatedInstance {
    /// Wraps unaggregated data with unit weights.
    pub fn unit(b: DataMatrix, a: DataMatrix) -> Result<Self> {
        if b.rows() != a.rows() {
            return Err(Error::mismatch("unit instance", b.shape(), a.shape()));
        }
        let weights = vec![1; a.rows()];
        Ok(AggregatedInstance {
            b_agg: b,
            a_agg: a,
            weights,
        })
    }

    /// Builds an instance from explicit means and weights.
    pub fn new(b_agg: DataMatrix, a_agg: DataMatrix, weights: Vec<usize>) -> Result<Self> {
        if b_agg.rows() != a_agg.rows() || weights.len() != a_agg.rows() {
            return Err(Error::mismatch(
                "aggregated instance",
                b_agg.shape(),
                a_agg.shape(),
            ));
        }
        if weights.contains(&0) {
            return Err(Error::InvalidArgument("weights must be positive".into()));
        }
        Ok(AggregatedInstance {
            b_agg,
            a_agg,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights_f64(&self) -> Vec<f64> {
        self.weights.iter().map(|&w| w as f64).collect()
    }
}

fn cluster_means(m: &DataMatrix, partition: &ClusterPartition) -> DataMatrix {
    let cols = m.cols();
    let mut values = Vec::with_capacity(partition.len() * cols);
    for cluster in partition.clusters() {
        let mut acc = vec![0.0; cols];
        for &i in cluster {
            for (a, v) in acc.iter_mut().zip(m.row(i)) {
                *a += v;
            }
        }
        let size = cluster.len() as f64;
        values.extend(acc.into_iter().map(|a| a / size));
    }
    DataMatrix::from_parts(partition.len(), cols, values)
}

/// Replaces each cluster by the arithmetic mean of its rows.
pub fn aggregate(
    b: &DataMatrix,
    a: &DataMatrix,
    partition: &ClusterPartition,
) -> Result<AggregatedInstance> {
    if b.rows() != a.rows() || a.rows() != partition.n() {
        return Err(Error::mismatch("aggregate", b.shape(), a.shape()));
    }
    Ok(AggregatedInstance {
        b_agg: cluster_means(b, partition),
        a_agg: cluster_means(a, partition),
        weights: partition.clusters().iter().map(Vec::len).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_rows_in_one_cluster() {
        let b = DataMatrix::from_rows(&[[1.0, 3.0], [5.0, 7.0]]).unwrap();
        let a = DataMatrix::zeros(2, 1);
        let agg = aggregate(&b, &a, &ClusterPartition::single_cluster(2).unwrap()).unwrap();
        assert_eq!(agg.b_agg.values(), &[3.0, 5.0]);
        assert_eq!(agg.weights, vec![2]);
    }

    #[test]
    fn singletons_are_identity() {
        let b = DataMatrix::from_rows(&[[1.0], [2.0], [4.0]]).unwrap();
        let a = DataMatrix::from_rows(&[[1.0, 0.5], [2.0, 0.25], [3.0, 0.125]]).unwrap();
        let agg = aggregate(&b, &a, &ClusterPartition::singletons(3)).unwrap();
        assert_eq!(agg.b_agg, b);
        assert_eq!(agg.a_agg, a);
        assert_eq!(agg.weights, vec![1, 1, 1]);
    }

    #[test]
    fn row_count_mismatch_is_error() {
        let b = DataMatrix::zeros(3, 1);
        let a = DataMatrix::zeros(2, 1);
        assert!(aggregate(&b, &a, &ClusterPartition::singletons(3)).is_err());
    }

    #[test]
    fn matches_mean_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = DataMatrix::new(
            10,
            3,
            (0..30).map(|_| rng.random_range(-9.0..9.0)).collect(),
        )
        .unwrap();
        let labels: Vec<usize> = (0..10)
            .map(|i| if i < 3 { i } else { rng.random_range(0..3) })
            .collect();
        let p = ClusterPartition::from_labels(&labels).unwrap();
        let agg = aggregate(&b, &DataMatrix::zeros(10, 0), &p).unwrap();
        assert_eq!(agg.weights.iter().sum::<usize>(), 10);
        for k in 0..3 {
            let members: Vec<usize> = (0..10).filter(|&i| labels[i] == k).collect();
            for j in 0..3 {
                let mean = members.iter().map(|&i| b.get(i, j)).sum::<f64>() / members.len() as f64;
                assert!((agg.b_agg.get(k, j) - mean).abs() <= 1e-12);
            }
        }
    }
}
