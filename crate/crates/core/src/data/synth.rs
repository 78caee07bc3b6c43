use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, DataMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    #[default]
    Regression,
    PcaSample,
}

fn default_noise() -> f64 {
    1.0
}

fn default_coef_range() -> (f64, f64) {
    (0.0, 100.0)
}

/// Parameters of a synthetic instance. Every field except `n` and `m` has a
/// default, so `{"n": 200, "m": 6}` is a valid spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub informative_p: Option<usize>,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default = "default_coef_range")]
    pub coef_range: (f64, f64),
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub kind: InstanceKind,
}

impl SyntheticSpec {
    pub fn regression(n: usize, m: usize, informative_p: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            m,
            informative_p: Some(informative_p),
            noise_sigma: 1.0,
            coef_range: default_coef_range(),
            seed,
            kind: InstanceKind::Regression,
        }
    }

    pub fn pca_sample(n: usize, m: usize, seed: u64) -> Self {
        SyntheticSpec {
            kind: InstanceKind::PcaSample,
            informative_p: None,
            ..SyntheticSpec::regression(n, m, 0, seed)
        }
    }

    /// Informative feature count; defaults to all features.
    pub fn informative(&self) -> usize {
        self.informative_p.unwrap_or(self.m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidArgument("n and m must be positive".into()));
        }
        if self.informative() > self.m {
            return Err(Error::InvalidArgument(format!(
                "informative_p = {} exceeds m = {}",
                self.informative(),
                self.m
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidArgument(
                "noise_sigma must be finite and >= 0".into(),
            ));
        }
        let (lo, hi) = self.coef_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(
                "coef_range must satisfy low < high".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionInstance {
    pub a: DataMatrix,
    pub b: DataMatrix,
    pub true_coeffs: Vec<f64>,
}

/// A loaded or generated instance; `b` is absent for PCA-type data.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub a: DataMatrix,
    pub b: Option<DataMatrix>,
    pub true_coeffs: Option<Vec<f64>>,
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Regression data from a single `ChaCha8Rng::seed_from_u64(seed)` stream,
/// consumed in this order:
///
/// 1. `A`, `n * m` standard normals in row-major order;
/// 2. the informative positions, `informative_p` distinct indices of `0..m`
///    (sorted afterwards);
/// 3. one uniform draw from `coef_range` per informative position, in
///    ascending position order;
/// 4. `n` standard normals scaled by `noise_sigma` (drawn even when the
///    scale is zero, so the stream layout never changes).
///
/// `B = A * coeffs + noise`.
pub fn generate_regression(spec: &SyntheticSpec) -> Result<RegressionInstance> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.m);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = DataMatrix::new(n, m, normal_matrix(&mut rng, n, m))?;
    let mut positions = sample(&mut rng, m, spec.informative()).into_vec();
    positions.sort_unstable();
    let mut true_coeffs = vec![0.0; m];
    let (lo, hi) = spec.coef_range;
    for &j in &positions {
        true_coeffs[j] = rng.random_range(lo..hi);
    }
    let b: Vec<f64> = (0..n)
        .map(|i| {
            let noise: f64 = rng.sample(StandardNormal);
            dot(a.row(i), &true_coeffs) + spec.noise_sigma * noise
        })
        .collect();
    Ok(RegressionInstance {
        b: DataMatrix::new(n, 1, b)?,
        a,
        true_coeffs,
    })
}

/// PCA-style data: `A[i][j] = (m - j) * z + noise_sigma * e` where `z` and
/// `e` are consecutive standard normals from the seeded stream (row-major).
/// Column scales decrease so the principal directions are well separated.
pub fn generate_pca_sample(spec: &SyntheticSpec) -> Result<DataMatrix> {
    spec.validate()?;
    let (n, m) = (spec.n, spec.m);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(n * m);
    for _ in 0..n {
        for j in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            values.push((m - j) as f64 * z + spec.noise_sigma * e);
        }
    }
    DataMatrix::new(n, m, values)
}

pub fn generate(spec: &SyntheticSpec) -> Result<Instance> {
    match spec.kind {
        InstanceKind::Regression => {
            let r = generate_regression(spec)?;
            Ok(Instance {
                a: r.a,
                b: Some(r.b),
                true_coeffs: Some(r.true_coeffs),
            })
        }
        InstanceKind::PcaSample => Ok(Instance {
            a: generate_pca_sample(spec)?,
            b: None,
            true_coeffs: None,
        }),
    }
}

/// Centers each column and scales it to unit (population) standard
/// deviation.
pub fn standardize_columns(a: &DataMatrix) -> Result<DataMatrix> {
    let (n, m) = a.shape();
    let mut out = a.clone().into_values();
    for j in 0..m {
        let col = a.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        if var == 0.0 {
            return Err(Error::DegenerateColumn(j));
        }
        let sd = var.sqrt();
        for i in 0..n {
            out[i * m + j] = (col[i] - mean) / sd;
        }
    }
    DataMatrix::new(n, m, out)
}
