use serde::Serialize;

use super::lad::{weighted_lad, RegressionSolution};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, stable_sum, DataMatrix};

/// An L1 best-fit hyperplane `{V alpha + beta}` and per-row coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperplaneFit {
    /// `m x (m-1)` orthonormal basis of the direction space.
    pub v: DataMatrix,
    pub beta: Vec<f64>,
    /// `n x (m-1)`; row `i` holds the coordinates of row `i`'s projection.
    pub alphas: DataMatrix,
    pub objective: f64,
    /// Coordinate whose regression produced the plane.
    pub response: usize,
    /// Slopes on the other coordinates (in column order) then the intercept.
    pub coefficients: Vec<f64>,
}

/// Fits with direct weighted-LAD solves.
pub fn solve_best_fit_hyperplane(a: &DataMatrix) -> Result<HyperplaneFit> {
    solve_best_fit_hyperplane_with(a, |design, target| {
        weighted_lad(design, target, &vec![1.0; target.len()])
    })
}

/// Fits the hyperplane through `m` coordinate regressions: coordinate `j` is
/// regressed on the others plus an intercept by `regress`, and the best
/// regression defines the plane (ties go to the lowest coordinate).
pub fn solve_best_fit_hyperplane_with<F>(a: &DataMatrix, mut regress: F) -> Result<HyperplaneFit>
where
    F: FnMut(&DataMatrix, &[f64]) -> Result<RegressionSolution>,
{
    let (n, m) = a.shape();
    if m < 2 || n < m {
        return Err(Error::InvalidArgument(format!(
            "hyperplane fit needs n >= m >= 2, got n = {n}, m = {m}"
        )));
    }
    for j in 0..m {
        let first = a.get(0, j);
        if (1..n).all(|i| a.get(i, j) == first) {
            return Err(Error::DegenerateColumn(j));
        }
    }

    let mut best: Option<(usize, RegressionSolution)> = None;
    for j in 0..m {
        let others: Vec<usize> = (0..m).filter(|&l| l != j).collect();
        let design = a.select_columns(&others)?.with_constant_column(1.0);
        let fit = regress(&design, &a.column(j))?;
        if best
            .as_ref()
            .is_none_or(|(_, b)| fit.objective < b.objective)
        {
            best = Some((j, fit));
        }
    }
    let (j, fit) = best.expect("m >= 2");
    Ok(reconstruct(a, j, fit.coefficients))
}

fn reconstruct(a: &DataMatrix, j: usize, coefficients: Vec<f64>) -> HyperplaneFit {
    let (n, m) = a.shape();
    let others: Vec<usize> = (0..m).filter(|&l| l != j).collect();
    let intercept = coefficients[m - 1];

    // Directions e_l + c_l e_j span the plane; orthonormalize in order.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
    for (k, &l) in others.iter().enumerate() {
        let mut d = vec![0.0; m];
        d[l] = 1.0;
        d[j] = coefficients[k];
        for q in &basis {
            let proj = dot(&d, q);
            d.iter_mut().zip(q).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = norm2(&d);
        d.iter_mut().for_each(|x| *x /= norm);
        basis.push(d);
    }
    let mut v = DataMatrix::zeros(m, m - 1);
    for (c, q) in basis.iter().enumerate() {
        for (r, x) in q.iter().enumerate() {
            v.set(r, c, *x);
        }
    }
    let mut beta = vec![0.0; m];
    beta[j] = intercept;

    let mut alphas = DataMatrix::zeros(n, m - 1);
    for i in 0..n {
        let row = a.row(i);
        let mut point = row.to_vec();
        point[j] = others
            .iter()
            .enumerate()
            .map(|(k, &l)| coefficients[k] * row[l])
            .sum::<f64>()
            + intercept;
        let shifted: Vec<f64> = point.iter().zip(&beta).map(|(p, b)| p - b).collect();
        for (c, q) in basis.iter().enumerate() {
            alphas.set(i, c, dot(&shifted, q));
        }
    }
    let objective = hyperplane_error(a, &v, &beta, &alphas);
    HyperplaneFit {
        v,
        beta,
        alphas,
        objective,
        response: j,
        coefficients,
    }
}

/// `sum_i ||A_i - (V alpha_i + beta)||_1`.
pub(crate) fn hyperplane_error(
    a: &DataMatrix,
    v: &DataMatrix,
    beta: &[f64],
    alphas: &DataMatrix,
) -> f64 {
    let (n, m) = a.shape();
    stable_sum((0..n).flat_map(|i| {
        (0..m).map(move |r| {
            let fitted = dot(v.row(r), alphas.row(i)) + beta[r];
            (a.get(i, r) - fitted).abs()
        })
    }))
}
