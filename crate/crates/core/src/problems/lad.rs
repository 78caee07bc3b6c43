use serde::Serialize;

use super::single_target;
use crate::aid::{AggregatedInstance, Fitted, ProblemDefinition};
use crate::error::{Error, Result};
use crate::linalg::{dot, matmul, stable_sum, DataMatrix};
use crate::lp::{self, LinearProgram, SimplexOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionSolution {
    pub coefficients: Vec<f64>,
    pub objective: f64,
}

impl Fitted for RegressionSolution {
    fn objective(&self) -> f64 {
        self.objective
    }
}

/// `sum_k w_k |b_k - A_k x|` with compensated summation.
pub fn weighted_l1_objective(a: &DataMatrix, b: &[f64], w: &[f64], x: &[f64]) -> f64 {
    stable_sum((0..a.rows()).map(|k| w[k] * (b[k] - dot(a.row(k), x)).abs()))
}

fn check_inputs(a: &DataMatrix, b: &[f64], w: &[f64]) -> Result<()> {
    if b.len() != a.rows() || w.len() != a.rows() {
        return Err(Error::mismatch(
            "weighted_lad",
            a.shape(),
            (b.len(), w.len()),
        ));
    }
    if a.cols() == 0 {
        return Err(Error::InvalidArgument(
            "regression needs at least one feature".into(),
        ));
    }
    if let Some(k) = w.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "weight {k} must be positive"
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: 0, col: 0 });
    }
    Ok(())
}

/// Weighted least-absolute-deviations fit.
///
/// Solved through the LP dual `max b^T u  s.t.  A^T u = 0, |u_k| <= w_k`,
/// which has one row per feature instead of one per observation. The
/// coefficients are the negated simplex multipliers, so they interpolate the
/// observations whose dual variable is basic.
pub fn weighted_lad(a: &DataMatrix, b: &[f64], w: &[f64]) -> Result<RegressionSolution> {
    check_inputs(a, b, w)?;
    let (n, m) = a.shape();
    let lp = LinearProgram {
        rows: m,
        cols: n,
        matrix: a.transpose().into_values(),
        rhs: vec![0.0; m],
        cost: b.iter().map(|v| -v).collect(),
        lower: w.iter().map(|v| -v).collect(),
        upper: w.to_vec(),
    };
    let sol = lp::solve(&lp, &SimplexOptions::default())?;
    let coefficients: Vec<f64> = sol
        .duals
        .iter()
        .map(|y| if *y == 0.0 { 0.0 } else { -y })
        .collect();
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Internal("non-finite regression coefficients".into()));
    }
    let objective = weighted_l1_objective(a, b, w, &coefficients);
    Ok(RegressionSolution {
        coefficients,
        objective,
    })
}

/// Exact weighted LAD on an aggregated instance (one target column).
pub fn solve_weighted_lad(agg: &AggregatedInstance) -> Result<RegressionSolution> {
    let b = single_target(agg)?;
    weighted_lad(&agg.a_agg, &b, &agg.weights_f64())
}

/// Reference solve on the textbook split formulation
/// `A x+ - A x- + e+ - e- = b` with all variables nonnegative.
///
/// It has one row per observation, so it is only practical for small
/// instances; it exists as an independent cross-check of [`weighted_lad`].
pub fn solve_lad_split_formulation(
    a: &DataMatrix,
    b: &[f64],
    w: &[f64],
) -> Result<RegressionSolution> {
    check_inputs(a, b, w)?;
    let (n, m) = a.shape();
    let cols = 2 * m + 2 * n;
    let mut matrix = vec![0.0; n * cols];
    for k in 0..n {
        let row = &mut matrix[k * cols..(k + 1) * cols];
        for j in 0..m {
            row[j] = a.get(k, j);
            row[m + j] = -a.get(k, j);
        }
        row[2 * m + k] = 1.0;
        row[2 * m + n + k] = -1.0;
    }
    let mut cost = vec![0.0; cols];
    cost[2 * m..2 * m + n].copy_from_slice(w);
    cost[2 * m + n..].copy_from_slice(w);
    let lp = LinearProgram {
        rows: n,
        cols,
        matrix,
        rhs: b.to_vec(),
        cost,
        lower: vec![0.0; cols],
        upper: vec![f64::INFINITY; cols],
    };
    let sol = lp::solve(&lp, &SimplexOptions::default())?;
    let coefficients: Vec<f64> = (0..m).map(|j| sol.x[j] - sol.x[m + j]).collect();
    let objective = weighted_l1_objective(a, b, w, &coefficients);
    Ok(RegressionSolution {
        coefficients,
        objective,
    })
}

/// LAD regression `min ||B - A x||_1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LadProblem;

pub(crate) fn apply_linear(coefficients: &[f64], a: &DataMatrix) -> Result<DataMatrix> {
    let x = DataMatrix::column_vector(coefficients)?;
    matmul(a, &x)
}

impl ProblemDefinition for LadProblem {
    type Solution = RegressionSolution;

    fn name(&self) -> &'static str {
        "lad"
    }

    fn apply(&self, solution: &RegressionSolution, a: &DataMatrix) -> Result<DataMatrix> {
        apply_linear(&solution.coefficients, a)
    }

    fn solve_weighted(&self, agg: &AggregatedInstance) -> Result<RegressionSolution> {
        solve_weighted_lad(agg)
    }
}
