//! Initial partitions for AID: feature construction plus one k-means
//! assignment pass.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aid::ClusterPartition;
use crate::error::{Error, Result};
use crate::linalg::{dot, gram, matmul, symmetric_eigen, DataMatrix};
use crate::problems::weighted_lad;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSource {
    /// Residuals of `model_count` LAD fits on random `subset_size` features.
    Residuals {
        model_count: usize,
        subset_size: usize,
    },
    /// Projection onto the top `p` L2 principal directions.
    PcaProjection {
        p: usize,
    },
    RawData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialClusterConfig {
    pub target_cluster_count: usize,
    pub feature_source: FeatureSource,
    pub seed: u64,
}

/// `ceil(0.01 n)` clamped to `[2, n]`.
pub fn default_cluster_count(n: usize) -> usize {
    n.div_ceil(100).max(2).min(n)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualModel {
    pub subset: Vec<usize>,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ResidualFeatures {
    /// `n x model_count`; column `c` is `B - A_S x_S` for model `c`.
    pub features: DataMatrix,
    pub models: Vec<ResidualModel>,
}

/// Residual vectors of `model_count` LAD regressions, each on a random
/// (sorted) `p`-subset of the columns drawn from a seeded ChaCha8 stream.
pub fn residual_features(
    b: &DataMatrix,
    a: &DataMatrix,
    p: usize,
    model_count: usize,
    seed: u64,
) -> Result<ResidualFeatures> {
    let (n, m) = a.shape();
    if b.shape() != (n, 1) {
        return Err(Error::mismatch("residual_features", b.shape(), (n, 1)));
    }
    if model_count == 0 || p == 0 || p > m {
        return Err(Error::InvalidArgument(format!(
            "need model_count >= 1 and 1 <= p <= {m}, got model_count = {model_count}, p = {p}"
        )));
    }
    let target = b.column(0);
    let ones = vec![1.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; n * model_count];
    let mut models = Vec::with_capacity(model_count);
    for c in 0..model_count {
        let mut subset = sample(&mut rng, m, p).into_vec();
        subset.sort_unstable();
        let design = a.select_columns(&subset)?;
        let fit = weighted_lad(&design, &target, &ones)?;
        for i in 0..n {
            values[i * model_count + c] = target[i] - dot(design.row(i), &fit.coefficients);
        }
        models.push(ResidualModel {
            subset,
            coefficients: fit.coefficients,
        });
    }
    Ok(ResidualFeatures {
        features: DataMatrix::new(n, model_count, values)?,
        models,
    })
}

/// `A X` with `X` the top-`p` eigenvectors of `A^T A`.
pub fn pca_projection_features(a: &DataMatrix, p: usize) -> Result<DataMatrix> {
    let m = a.cols();
    if p == 0 || p > m {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p <= {m}, got {p}"
        )));
    }
    let eig = symmetric_eigen(&gram(a))?;
    let top = eig
        .eigenvectors
        .select_columns(&(0..p).collect::<Vec<_>>())?;
    matmul(a, &top)
}

/// One k-means assignment pass: `k` distinct seeded rows become centers and
/// every row joins its nearest center (lowest index on ties). Centers that
/// end up empty are dropped.
pub fn kmeans_one_pass(features: &DataMatrix, k: usize, seed: u64) -> Result<ClusterPartition> {
    let n = features.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= {n}, got {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = sample(&mut rng, n, k).into_vec();
    centers.sort_unstable();
    let labels: Vec<usize> = (0..n)
        .map(|i| {
            let row = features.row(i);
            let mut best = (f64::INFINITY, 0);
            for (c, &r) in centers.iter().enumerate() {
                let d: f64 = row
                    .iter()
                    .zip(features.row(r))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                if d < best.0 {
                    best = (d, c);
                }
            }
            best.1
        })
        .collect();
    ClusterPartition::from_labels(&labels)
}

/// Builds features per `config` and clusters them.
pub fn initial_partition(
    b: &DataMatrix,
    a: &DataMatrix,
    config: &InitialClusterConfig,
) -> Result<ClusterPartition> {
    let features = match &config.feature_source {
        FeatureSource::Residuals {
            model_count,
            subset_size,
        } => residual_features(b, a, *subset_size, *model_count, config.seed)?.features,
        FeatureSource::PcaProjection { p } => pca_projection_features(a, *p)?,
        FeatureSource::RawData => a.clone(),
    };
    kmeans_one_pass(&features, config.target_cluster_count, config.seed)
}
