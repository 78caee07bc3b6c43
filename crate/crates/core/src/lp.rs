//! Dense bounded-variable primal simplex.
//!
//! Solves `min c^T x  s.t.  M x = b,  lower <= x <= upper` where every lower
//! bound is finite and upper bounds may be infinite. Pivoting follows Bland's
//! rule (lowest eligible index enters, lowest index leaves among ratio ties),
//! which guarantees termination on degenerate problems. An iteration cap is
//! kept as a defensive guard and surfaces as [`LpError::IterationLimit`].
//!
//! Phase I adds one artificial column `sign(r_i) e_i` per row. The artificial
//! columns stay in the tableau afterwards with bounds `[0, 0]`, so they can
//! leave the basis but never re-enter.

use thiserror::Error;

use crate::linalg::{solve_linear, DataMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible (phase I residual {0:e})")]
    Infeasible(f64),
    #[error("linear program is unbounded in the direction of column {0}")]
    Unbounded(usize),
    #[error("simplex exceeded {0} iterations")]
    IterationLimit(usize),
    #[error("malformed linear program: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols` constraint matrix.
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    fn validate(&self) -> Result<(), LpError> {
        let bad = |what: &str| Err(LpError::Invalid(what.to_string()));
        if self.matrix.len() != self.rows * self.cols {
            return bad("matrix size does not match rows x cols");
        }
        if self.rhs.len() != self.rows {
            return bad("rhs length does not match rows");
        }
        if self.cost.len() != self.cols
            || self.lower.len() != self.cols
            || self.upper.len() != self.cols
        {
            return bad("cost/bound length does not match cols");
        }
        if self
            .matrix
            .iter()
            .chain(&self.rhs)
            .chain(&self.cost)
            .any(|v| !v.is_finite())
        {
            return bad("non-finite data");
        }
        for j in 0..self.cols {
            if !self.lower[j].is_finite() || self.upper[j].is_nan() || self.upper[j] < self.lower[j]
            {
                return Err(LpError::Invalid(format!("bad bounds on column {j}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Maximum pivots plus bound flips over both phases; `None` picks a
    /// size-based default.
    pub max_iterations: Option<usize>,
    pub tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_iterations: None,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers `y` with `B^T y = c_B` for the final basis.
    pub duals: Vec<f64>,
    /// Basic column per row; indices `>= cols` are artificial.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

const REFACTOR_EVERY: usize = 64;

struct Tableau<'a> {
    lp: &'a LinearProgram,
    /// Total columns including artificials.
    width: usize,
    /// `B^{-1} [M | Art]`, row-major `rows x width`.
    t: Vec<f64>,
    art_sign: Vec<f64>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    iterations: usize,
    limit: usize,
    tol: f64,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a LinearProgram, opts: &SimplexOptions) -> Self {
        let (rows, cols) = (lp.rows, lp.cols);
        let width = cols + rows;
        // Start nonbasic columns on the bound their cost favors.
        let mut x = vec![0.0; width];
        for j in 0..cols {
            x[j] = if lp.cost[j] < 0.0 && lp.upper[j].is_finite() {
                lp.upper[j]
            } else {
                lp.lower[j]
            };
        }
        let mut residual = lp.rhs.clone();
        for (i, r) in residual.iter_mut().enumerate() {
            let row = &lp.matrix[i * cols..(i + 1) * cols];
            *r -= row.iter().zip(&x[..cols]).map(|(a, v)| a * v).sum::<f64>();
        }
        let art_sign: Vec<f64> = residual
            .iter()
            .map(|&r| if r < 0.0 { -1.0 } else { 1.0 })
            .collect();
        let mut t = vec![0.0; rows * width];
        for i in 0..rows {
            let s = art_sign[i];
            for j in 0..cols {
                t[i * width + j] = s * lp.matrix[i * cols + j];
            }
            t[i * width + cols + i] = 1.0;
            x[cols + i] = residual[i].abs();
        }
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        lower.extend(std::iter::repeat_n(0.0, rows));
        upper.extend(std::iter::repeat_n(f64::INFINITY, rows));
        let mut cost = vec![0.0; width];
        cost[cols..].iter_mut().for_each(|c| *c = 1.0);
        let basis: Vec<usize> = (cols..width).collect();
        let mut is_basic = vec![false; width];
        basis.iter().for_each(|&b| is_basic[b] = true);
        let limit = opts
            .max_iterations
            .unwrap_or_else(|| 50_000usize.max(200 * (rows + cols)));
        let mut tab = Tableau {
            lp,
            width,
            t,
            art_sign,
            x,
            lower,
            upper,
            cost,
            reduced: vec![0.0; width],
            basis,
            is_basic,
            iterations: 0,
            limit,
            tol: opts.tolerance,
        };
        tab.recompute_reduced();
        tab
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let (rows, cols) = (self.lp.rows, self.lp.cols);
        if j < cols {
            (0..rows).map(|i| self.lp.matrix[i * cols + j]).collect()
        } else {
            let mut e = vec![0.0; rows];
            e[j - cols] = self.art_sign[j - cols];
            e
        }
    }

    fn recompute_reduced(&mut self) {
        let w = self.width;
        for j in 0..w {
            let mut d = self.cost[j];
            for (i, &b) in self.basis.iter().enumerate() {
                d -= self.cost[b] * self.t[i * w + j];
            }
            self.reduced[j] = if self.is_basic[j] { 0.0 } else { d };
        }
    }

    /// Rebuilds the tableau and basic values from the original data.
    fn refactor(&mut self) -> Result<(), LpError> {
        let rows = self.lp.rows;
        if rows == 0 {
            return Ok(());
        }
        let w = self.width;
        let mut bmat = vec![0.0; rows * rows];
        for (k, &b) in self.basis.iter().enumerate() {
            for (i, v) in self.column(b).into_iter().enumerate() {
                bmat[i * rows + k] = v;
            }
        }
        let bmat =
            DataMatrix::new(rows, rows, bmat).map_err(|e| LpError::Numerical(e.to_string()))?;
        let mut rhs = self.lp.rhs.clone();
        for j in 0..w {
            if !self.is_basic[j] && self.x[j] != 0.0 {
                for (i, v) in self.column(j).into_iter().enumerate() {
                    rhs[i] -= v * self.x[j];
                }
            }
        }
        let mut t = vec![0.0; rows * w];
        for j in 0..w {
            let col = self.column(j);
            if col.iter().all(|&v| v == 0.0) {
                continue;
            }
            let sol = match solve_linear(&bmat, &col) {
                Ok(s) => s,
                // Keep the updated tableau if the fresh factorization is
                // numerically worse than what we have.
                Err(_) => return Ok(()),
            };
            for i in 0..rows {
                t[i * w + j] = sol[i];
            }
        }
        let xb = match solve_linear(&bmat, &rhs) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        self.t = t;
        for (i, &b) in self.basis.iter().enumerate() {
            self.x[b] = xb[i];
        }
        self.recompute_reduced();
        Ok(())
    }

    fn entering(&self) -> Option<(usize, f64)> {
        let scale = self.cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let tol = self.tol * scale;
        for j in 0..self.width {
            if self.is_basic[j] || self.upper[j] == self.lower[j] {
                continue;
            }
            let d = self.reduced[j];
            let at_upper = self.x[j] >= self.upper[j];
            if d < -tol && !at_upper {
                return Some((j, 1.0));
            }
            if d > tol && self.x[j] > self.lower[j] {
                return Some((j, -1.0));
            }
        }
        None
    }

    fn iterate(&mut self) -> Result<(), LpError> {
        let rows = self.lp.rows;
        let w = self.width;
        let mut since_refactor = 0;
        loop {
            let Some((q, dir)) = self.entering() else {
                if since_refactor > 0 {
                    // Confirm optimality on fresh data before stopping.
                    self.refactor()?;
                    since_refactor = 0;
                    if self.entering().is_some() {
                        continue;
                    }
                }
                return Ok(());
            };
            if self.iterations >= self.limit {
                return Err(LpError::IterationLimit(self.limit));
            }
            self.iterations += 1;

            // Entering moves by dir * theta; basic i moves by -dir * theta * t[i][q].
            let mut theta = self.upper[q] - self.lower[q];
            let mut leave: Option<usize> = None;
            let piv_tol = 1e-11;
            for i in 0..rows {
                let a = self.t[i * w + q];
                if a.abs() <= piv_tol {
                    continue;
                }
                let rate = -dir * a;
                let b = self.basis[i];
                let room = if rate < 0.0 {
                    (self.x[b] - self.lower[b]).max(0.0) / -rate
                } else if self.upper[b].is_finite() {
                    (self.upper[b] - self.x[b]).max(0.0) / rate
                } else {
                    continue;
                };
                let slack = 1e-12 * theta.abs().max(1.0);
                let better = match leave {
                    // Ties with the entering column's own bound favor a flip.
                    None => room < theta,
                    Some(l) => room < theta - slack || (room <= theta + slack && b < self.basis[l]),
                };
                if better {
                    theta = room;
                    leave = Some(i);
                }
            }
            if !theta.is_finite() {
                return Err(LpError::Unbounded(q));
            }
            let step = dir * theta;
            self.x[q] += step;
            for i in 0..rows {
                let a = self.t[i * w + q];
                if a != 0.0 {
                    self.x[self.basis[i]] -= step * a;
                }
            }
            let Some(r) = leave else {
                // Bound flip: the entering column reached its other bound.
                self.x[q] = if dir > 0.0 {
                    self.upper[q]
                } else {
                    self.lower[q]
                };
                continue;
            };
            let out = self.basis[r];
            // Snap the leaving variable onto the bound it hit.
            let a = self.t[r * w + q];
            self.x[out] = if -dir * a < 0.0 {
                self.lower[out]
            } else {
                self.upper[out]
            };
            self.pivot(r, q);
            self.basis[r] = q;
            self.is_basic[q] = true;
            self.is_basic[out] = false;
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let rows = self.lp.rows;
        let p = self.t[r * w + q];
        for j in 0..w {
            self.t[r * w + j] /= p;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            row[q] = 0.0;
        }
        let d = self.reduced[q];
        if d != 0.0 {
            for (rj, pr) in self.reduced.iter_mut().zip(&pivot_row) {
                *rj -= d * pr;
            }
        }
        self.reduced[q] = 0.0;
    }

    fn start_phase_two(&mut self) {
        let cols = self.lp.cols;
        for j in cols..self.width {
            self.upper[j] = 0.0;
            if !self.is_basic[j] {
                self.x[j] = 0.0;
            }
        }
        self.cost = self.lp.cost.clone();
        self.cost.extend(std::iter::repeat_n(0.0, self.lp.rows));
        self.recompute_reduced();
    }

    fn duals(&self) -> Result<Vec<f64>, LpError> {
        let rows = self.lp.rows;
        if rows == 0 {
            return Ok(Vec::new());
        }
        // Solve B^T y = c_B.
        let mut bt = vec![0.0; rows * rows];
        let mut cb = vec![0.0; rows];
        for (k, &b) in self.basis.iter().enumerate() {
            for (i, v) in self.column(b).into_iter().enumerate() {
                bt[k * rows + i] = v;
            }
            cb[k] = self.cost[b];
        }
        let bt = DataMatrix::new(rows, rows, bt).map_err(|e| LpError::Numerical(e.to_string()))?;
        solve_linear(&bt, &cb).map_err(|e| LpError::Numerical(e.to_string()))
    }
}

/// Solves a linear program with the bounded primal simplex method.
pub fn solve(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let mut tab = Tableau::new(lp, opts);
    tab.iterate()?;
    let scale = lp.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let infeasibility: f64 = tab
        .basis
        .iter()
        .filter(|&&b| b >= lp.cols)
        .map(|&b| tab.x[b])
        .sum::<f64>()
        + (lp.cols..tab.width)
            .filter(|&j| !tab.is_basic[j])
            .map(|j| tab.x[j])
            .sum::<f64>();
    if infeasibility > 1e-7 * scale {
        return Err(LpError::Infeasible(infeasibility));
    }
    tab.start_phase_two();
    tab.iterate()?;
    tab.refactor()?;
    let mut x: Vec<f64> = tab.x[..lp.cols].to_vec();
    for (j, v) in x.iter_mut().enumerate() {
        *v = v.clamp(lp.lower[j], lp.upper[j]);
    }
    let objective = x.iter().zip(&lp.cost).map(|(a, b)| a * b).sum();
    let duals = tab.duals()?;
    Ok(LpSolution {
        x,
        objective,
        duals,
        basis: tab.basis.clone(),
        iterations: tab.iterations,
    })
}
