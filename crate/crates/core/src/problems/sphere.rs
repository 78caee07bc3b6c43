use serde::Serialize;

use super::lad::{apply_linear, weighted_l1_objective, weighted_lad};
use super::single_target;
use crate::aid::{AggregatedInstance, Fitted, ProblemDefinition};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, solve_linear, DataMatrix};
use crate::lp::{self, LinearProgram, SimplexOptions};

pub const DEFAULT_SPHERE_TOL: f64 = 1e-7;
const MAX_ROUNDS: usize = 300;
const POLISH_PASSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereSolution {
    pub coefficients: Vec<f64>,
    pub objective: f64,
    /// Certified upper minus lower bound at exit.
    pub certified_gap: f64,
    pub cuts: usize,
}

impl Fitted for SphereSolution {
    fn objective(&self) -> f64 {
        self.objective
    }
}

struct Ball<'a> {
    a: &'a DataMatrix,
    b: &'a [f64],
    w: &'a [f64],
    radius_sq: f64,
    radius: f64,
}

impl Ball<'_> {
    fn objective(&self, x: &[f64]) -> f64 {
        weighted_l1_objective(self.a, self.b, self.w, x)
    }

    /// Pulls `x` back inside the ball if rounding left it just outside.
    fn clip(&self, mut x: Vec<f64>) -> Vec<f64> {
        let norm = norm2(&x);
        if norm > self.radius {
            let s = self.radius / norm;
            x.iter_mut().for_each(|v| *v *= s);
        }
        x
    }

    /// Lower bound from the LP over the polytope `{x : g_l^T x <= r}`,
    /// solved in dual form. Returns the LP minimizer and the bound.
    fn relaxation(&self, cuts: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
        let (n, m) = self.a.shape();
        let cols = n + cuts.len();
        let mut matrix = vec![0.0; m * cols];
        for j in 0..m {
            let row = &mut matrix[j * cols..(j + 1) * cols];
            for k in 0..n {
                row[k] = self.a.get(k, j);
            }
            for (l, g) in cuts.iter().enumerate() {
                row[n + l] = -g[j];
            }
        }
        let mut cost: Vec<f64> = self.b.iter().map(|v| -v).collect();
        cost.extend(std::iter::repeat_n(self.radius, cuts.len()));
        let mut lower: Vec<f64> = self.w.iter().map(|v| -v).collect();
        lower.extend(std::iter::repeat_n(0.0, cuts.len()));
        let mut upper = self.w.to_vec();
        upper.extend(std::iter::repeat_n(f64::INFINITY, cuts.len()));
        let lp = LinearProgram {
            rows: m,
            cols,
            matrix,
            rhs: vec![0.0; m],
            cost,
            lower,
            upper,
        };
        let sol = lp::solve(&lp, &SimplexOptions::default())?;
        let x: Vec<f64> = sol.duals.iter().map(|y| -y).collect();
        // Both numbers equal the LP optimum in exact arithmetic; keep the
        // smaller one so rounding cannot overstate the bound.
        let bound = self.objective(&x).min(-sol.objective);
        Ok((x, bound))
    }

    /// Candidate optima built from the residual structure at `x`: zero the
    /// `j` smallest residuals, fix the signs of the rest, and maximize the
    /// resulting linear objective over the sphere within that affine set.
    fn polish_candidates(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let (n, m) = self.a.shape();
        let residuals: Vec<f64> = (0..n).map(|k| self.b[k] - dot(self.a.row(k), x)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &k| {
            residuals[i]
                .abs()
                .total_cmp(&residuals[k].abs())
                .then(i.cmp(&k))
        });
        let mut out = Vec::new();
        for j in 0..m.min(n + 1) {
            let active = &order[..j];
            let mut c = vec![0.0; m];
            for &k in &order[j..] {
                let s = if residuals[k] >= 0.0 { 1.0 } else { -1.0 };
                for (ci, ai) in c.iter_mut().zip(self.a.row(k)) {
                    *ci += self.w[k] * s * ai;
                }
            }
            let Some((x0, pc)) = self.affine_pieces(active, &c) else {
                continue;
            };
            let rest = self.radius_sq - dot(&x0, &x0);
            if rest < 0.0 {
                continue;
            }
            let pn = norm2(&pc);
            let cand = if pn <= 1e-14 * norm2(&c).max(f64::MIN_POSITIVE) {
                x0
            } else {
                let step = rest.sqrt() / pn;
                x0.iter().zip(&pc).map(|(a, p)| a + step * p).collect()
            };
            out.push(self.clip(cand));
        }
        out
    }

    /// Min-norm solution of `A_S x = b_S` and the projection of `c` onto the
    /// null space of `A_S`.
    fn affine_pieces(&self, active: &[usize], c: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let m = self.a.cols();
        if active.is_empty() {
            return Some((vec![0.0; m], c.to_vec()));
        }
        let rows = self.a.select_rows(active);
        let j = active.len();
        let mut gram = DataMatrix::zeros(j, j);
        for r in 0..j {
            for s in 0..j {
                gram.set(r, s, dot(rows.row(r), rows.row(s)));
            }
        }
        let bs: Vec<f64> = active.iter().map(|&k| self.b[k]).collect();
        let z = solve_linear(&gram, &bs).ok()?;
        let ac: Vec<f64> = (0..j).map(|r| dot(rows.row(r), c)).collect();
        let zc = solve_linear(&gram, &ac).ok()?;
        let mut x0 = vec![0.0; m];
        let mut pc = c.to_vec();
        for r in 0..j {
            for (col, v) in rows.row(r).iter().enumerate() {
                x0[col] += z[r] * v;
                pc[col] -= zc[r] * v;
            }
        }
        Some((x0, pc))
    }

    fn unit_normal(x: &[f64]) -> Option<Vec<f64>> {
        let n = norm2(x);
        (n > 0.0).then(|| x.iter().map(|v| v / n).collect())
    }
}

fn push_cut(cuts: &mut Vec<Vec<f64>>, at: &[f64]) -> bool {
    let Some(g) = Ball::unit_normal(at) else {
        return false;
    };
    if cuts.iter().any(|c| dot(c, &g) > 1.0 - 1e-15) {
        return false;
    }
    cuts.push(g);
    true
}

/// Weighted LAD over the ball `||x||^2 <= R`.
///
/// If the unconstrained fit is inside the ball it is returned directly.
/// Otherwise tangent cuts build a polyhedral outer approximation whose LP
/// optimum is a lower bound, while projected and active-set points supply
/// feasible upper bounds; the loop stops once the two agree to
/// `tol * (1 + |objective|)`.
pub fn solve_sphere_lad(
    agg: &AggregatedInstance,
    radius_sq: f64,
    tol: f64,
) -> Result<SphereSolution> {
    let b = single_target(agg)?;
    sphere_lad(&agg.a_agg, &b, &agg.weights_f64(), radius_sq, tol)
}

pub(crate) fn sphere_lad(
    a: &DataMatrix,
    b: &[f64],
    w: &[f64],
    radius_sq: f64,
    tol: f64,
) -> Result<SphereSolution> {
    if !(radius_sq > 0.0) || !radius_sq.is_finite() {
        return Err(Error::InvalidArgument(
            "sphere radius must be positive".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(
            "sphere tolerance must be positive".into(),
        ));
    }
    let free = weighted_lad(a, b, w)?;
    if dot(&free.coefficients, &free.coefficients) <= radius_sq {
        return Ok(SphereSolution {
            coefficients: free.coefficients,
            objective: free.objective,
            certified_gap: 0.0,
            cuts: 0,
        });
    }
    let ball = Ball {
        a,
        b,
        w,
        radius_sq,
        radius: radius_sq.sqrt(),
    };
    let mut best = ball.clip(free.coefficients.clone());
    let mut upper = ball.objective(&best);
    let improve = |cand: Vec<f64>, best: &mut Vec<f64>, upper: &mut f64| -> bool {
        let v = ball.objective(&cand);
        if v < *upper {
            *upper = v;
            *best = cand;
            true
        } else {
            false
        }
    };
    let mut cuts: Vec<Vec<f64>> = Vec::new();
    push_cut(&mut cuts, &free.coefficients);
    let mut gap = f64::INFINITY;
    for _ in 0..MAX_ROUNDS {
        let (x_lp, lower) = ball.relaxation(&cuts)?;
        // Inside the ball the LP point is optimal; otherwise its projection
        // and the active-set candidates compete for the upper bound.
        improve(ball.clip(x_lp.clone()), &mut best, &mut upper);
        if norm2(&x_lp) > ball.radius * (1.0 + 1e-12) {
            for start in [x_lp.clone(), best.clone()] {
                let mut from = start;
                for _ in 0..POLISH_PASSES {
                    let mut moved = false;
                    for cand in ball.polish_candidates(&from) {
                        moved |= improve(cand, &mut best, &mut upper);
                    }
                    if !moved {
                        break;
                    }
                    from = best.clone();
                }
            }
        }
        gap = (upper - lower).max(0.0);
        if gap <= tol * (1.0 + upper.abs()) {
            return Ok(SphereSolution {
                coefficients: best,
                objective: upper,
                certified_gap: gap,
                cuts: cuts.len(),
            });
        }
        let added_lp = push_cut(&mut cuts, &x_lp);
        let added_best = push_cut(&mut cuts, &best);
        if !added_lp && !added_best {
            break;
        }
    }
    Err(Error::NotCertified {
        coefficients: best,
        objective: upper,
        gap,
        cuts: cuts.len(),
    })
}

/// LAD regression restricted to `||x||_2^2 <= R`.
#[derive(Debug, Clone, Copy)]
pub struct SphereProblem {
    pub radius_sq: f64,
    pub tol: f64,
}

impl SphereProblem {
    pub fn new(radius_sq: f64) -> Self {
        SphereProblem {
            radius_sq,
            tol: DEFAULT_SPHERE_TOL,
        }
    }
}

impl ProblemDefinition for SphereProblem {
    type Solution = SphereSolution;

    fn name(&self) -> &'static str {
        "sphere"
    }

    fn apply(&self, solution: &SphereSolution, a: &DataMatrix) -> Result<DataMatrix> {
        apply_linear(&solution.coefficients, a)
    }

    fn solve_weighted(&self, agg: &AggregatedInstance) -> Result<SphereSolution> {
        solve_sphere_lad(agg, self.radius_sq, self.tol)
    }
}
