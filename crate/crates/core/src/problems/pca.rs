use serde::Serialize;

use crate::aid::{AggregatedInstance, Fitted, ProblemDefinition, Sense};
use crate::error::{Error, Result};
use crate::linalg::{dot, matmul, stable_sum, thin_svd_p2, DataMatrix};

pub const DEFAULT_PCA_CAP: u64 = 1 << 26;

/// How often the incrementally updated `A^T S` is rebuilt from scratch.
const RESYNC_EVERY: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaSolution {
    /// `m x p` with orthonormal columns.
    pub x: DataMatrix,
    pub objective: f64,
    /// Optimal sign matrix, `n x p` row-major.
    pub sign_matrix: Vec<i8>,
}

impl Fitted for PcaSolution {
    fn objective(&self) -> f64 {
        self.objective
    }
}

/// Scales row `k` of the aggregated data by its cluster size.
pub fn weighted_to_unweighted_pca(agg: &AggregatedInstance) -> DataMatrix {
    agg.a_agg
        .scale_rows(&agg.weights_f64())
        .expect("weights match rows by construction")
}

fn projected_deviation(a: &DataMatrix, x: &DataMatrix, weights: Option<&[f64]>) -> f64 {
    let p = x.cols();
    stable_sum((0..a.rows()).flat_map(|i| {
        let w = weights.map_or(1.0, |w| w[i]);
        (0..p).map(move |c| {
            let col: f64 = (0..x.rows()).map(|r| a.get(i, r) * x.get(r, c)).sum();
            w * col.abs()
        })
    }))
}

/// Squared nuclear norm of an `m x p` matrix stored column-wise, p <= 2.
fn nuclear_sq(cols: &[Vec<f64>]) -> f64 {
    match cols {
        [u] => dot(u, u),
        [u, v] => {
            let (g11, g22, g12) = (dot(u, u), dot(v, v), dot(u, v));
            let det = (g11 * g22 - g12 * g12).max(0.0);
            g11 + g22 + 2.0 * det.sqrt()
        }
        _ => unreachable!("p is validated to be 1 or 2"),
    }
}

fn check_pca_args(n: usize, m: usize, p: usize, cap: u64) -> Result<u32> {
    if p == 0 || p > 2 {
        return Err(Error::Unsupported(format!(
            "L1-PCA supports p in {{1, 2}}, got {p}"
        )));
    }
    if m < p {
        return Err(Error::InvalidArgument(format!(
            "need p <= m, got p = {p}, m = {m}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "L1-PCA needs at least one row".into(),
        ));
    }
    let bits = n * p - 1;
    if bits >= 64 || (1u64 << bits) > cap {
        return Err(Error::TooLarge(format!(
            "2^{bits} sign matrices exceed the cap of {cap}"
        )));
    }
    Ok(bits as u32)
}

/// Exact `max_{X^T X = I_p} ||A X||_1` for p in {1, 2}.
///
/// Enumerates sign matrices `S` with `S[0][0] = +1` in Gray-code order,
/// scores each by the nuclear norm of `A^T S` and rounds the best one to
/// `X = U V^T`. Among equal scores the sign matrix with the smallest counter
/// value wins, where entry `k` (row-major, skipping `(0, 0)`) is bit `k` and
/// `-1` sets the bit.
pub fn solve_l1pca_exact(a: &DataMatrix, p: usize, cap: u64) -> Result<PcaSolution> {
    enumerate(a, p, cap)
}

/// Weighted aggregated L1-PCA, solved as the unweighted problem on the
/// row-scaled data. The reported objective is `sum_k w_k ||A_k X||_1`.
pub fn solve_weighted_l1pca(agg: &AggregatedInstance, p: usize, cap: u64) -> Result<PcaSolution> {
    let scaled = weighted_to_unweighted_pca(agg);
    let mut sol = enumerate(&scaled, p, cap)?;
    sol.objective = projected_deviation(&agg.a_agg, &sol.x, Some(&agg.weights_f64()));
    Ok(sol)
}

fn enumerate(a: &DataMatrix, p: usize, cap: u64) -> Result<PcaSolution> {
    let (n, m) = a.shape();
    let bits = check_pca_args(n, m, p, cap)?;
    // Entry k of the counter maps to (row, col) = divmod(k + 1, p).
    let entry = |k: u32| ((k as usize + 1) / p, (k as usize + 1) % p);
    let build = |code: u64| -> Vec<Vec<f64>> {
        let mut cols = vec![vec![0.0; m]; p];
        for i in 0..n {
            for c in 0..p {
                let k = i * p + c;
                let neg = k > 0 && code & (1 << (k - 1)) != 0;
                let s = if neg { -1.0 } else { 1.0 };
                for (j, v) in cols[c].iter_mut().enumerate() {
                    *v += s * a.get(i, j);
                }
            }
        }
        cols
    };

    let mut code: u64 = 0;
    let mut cols = build(code);
    let mut best_score = nuclear_sq(&cols);
    let mut best_code = code;
    let total: u64 = 1 << bits;
    for step in 1..total {
        let flip = step.trailing_zeros();
        code ^= 1 << flip;
        if step % RESYNC_EVERY == 0 {
            cols = build(code);
        } else {
            let (i, c) = entry(flip);
            let s = if code & (1 << flip) != 0 { -2.0 } else { 2.0 };
            for (j, v) in cols[c].iter_mut().enumerate() {
                *v += s * a.get(i, j);
            }
        }
        let score = nuclear_sq(&cols);
        let tie = (score - best_score).abs() <= 1e-12 * best_score.max(1.0);
        if (tie && code < best_code) || (!tie && score > best_score) {
            best_score = score;
            best_code = code;
        }
    }

    let cols = build(best_code);
    let mut m_mat = DataMatrix::zeros(m, p);
    for (c, col) in cols.iter().enumerate() {
        for (j, v) in col.iter().enumerate() {
            m_mat.set(j, c, *v);
        }
    }
    let x = thin_svd_p2(&m_mat)?.polar();
    let sign_matrix = (0..n * p)
        .map(|k| {
            if k > 0 && best_code & (1 << (k - 1)) != 0 {
                -1
            } else {
                1
            }
        })
        .collect();
    let objective = projected_deviation(a, &x, None);
    Ok(PcaSolution {
        x,
        objective,
        sign_matrix,
    })
}

/// L1-PCA maximizing projected deviation `max ||A X||_1`.
///
/// The target matrix is all zeros; see [`PcaProblem::target`].
#[derive(Debug, Clone, Copy)]
pub struct PcaProblem {
    pub p: usize,
    pub cap: u64,
}

impl PcaProblem {
    pub fn new(p: usize) -> Self {
        PcaProblem {
            p,
            cap: DEFAULT_PCA_CAP,
        }
    }

    /// The all-zero target matrix the AID driver expects for this problem.
    pub fn target(&self, n: usize) -> DataMatrix {
        DataMatrix::zeros(n, self.p)
    }
}

impl ProblemDefinition for PcaProblem {
    type Solution = PcaSolution;

    fn name(&self) -> &'static str {
        "l1pca"
    }

    fn sense(&self) -> Sense {
        Sense::Maximize
    }

    fn apply(&self, solution: &PcaSolution, a: &DataMatrix) -> Result<DataMatrix> {
        matmul(a, &solution.x)
    }

    fn solve_weighted(&self, agg: &AggregatedInstance) -> Result<PcaSolution> {
        solve_weighted_l1pca(agg, self.p, self.cap)
    }
}
