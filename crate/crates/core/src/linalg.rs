//! Small dense linear algebra used by every solver.
//!
//! Everything here works on [`DataMatrix`], a row-major `f64` matrix whose
//! entries are guaranteed finite. Summation order is fixed (row-major,
//! left-to-right) so results are bit-reproducible across runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major real matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl TryFrom<RawMatrix> for DataMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        DataMatrix::new(raw.rows, raw.cols, raw.values)
    }
}

impl From<DataMatrix> for RawMatrix {
    fn from(m: DataMatrix) -> Self {
        RawMatrix {
            rows: m.rows,
            cols: m.cols,
            values: m.values,
        }
    }
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidShape(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(DataMatrix { rows, cols, values })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::InvalidShape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        DataMatrix::new(rows.len(), cols, values)
    }

    pub fn column_vector(values: &[f64]) -> Result<Self> {
        DataMatrix::new(values.len(), 1, values.to_vec())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DataMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DataMatrix::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_parts(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        DataMatrix { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    #[inline]
    pub(crate) fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size.
        let cols = self.cols.max(1);
        self.values
            .chunks_exact(cols)
            .take(if self.cols == 0 { 0 } else { self.rows })
    }

    pub fn transpose(&self) -> DataMatrix {
        let mut out = vec![0.0; self.values.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.get(i, j);
            }
        }
        DataMatrix::from_parts(self.cols, self.rows, out)
    }

    pub fn select_columns(&self, columns: &[usize]) -> Result<DataMatrix> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.cols) {
            return Err(Error::InvalidArgument(format!(
                "column {bad} out of range for {} columns",
                self.cols
            )));
        }
        let mut out = Vec::with_capacity(self.rows * columns.len());
        for row in self.iter_rows() {
            out.extend(columns.iter().map(|&c| row[c]));
        }
        Ok(DataMatrix::from_parts(self.rows, columns.len(), out))
    }

    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        let mut out = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            out.extend_from_slice(self.row(r));
        }
        DataMatrix::from_parts(rows.len(), self.cols, out)
    }

    /// Appends a constant column (e.g. an intercept) on the right.
    pub fn with_constant_column(&self, value: f64) -> DataMatrix {
        let mut out = Vec::with_capacity(self.rows * (self.cols + 1));
        for i in 0..self.rows {
            out.extend_from_slice(&self.values[i * self.cols..(i + 1) * self.cols]);
            out.push(value);
        }
        DataMatrix::from_parts(self.rows, self.cols + 1, out)
    }

    pub fn sub(&self, other: &DataMatrix) -> Result<DataMatrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn add(&self, other: &DataMatrix) -> Result<DataMatrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    fn zip_with(
        &self,
        other: &DataMatrix,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DataMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::mismatch(op, self.shape(), other.shape()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        DataMatrix::new(self.rows, self.cols, values)
    }

    pub fn scale(&self, factor: f64) -> Result<DataMatrix> {
        DataMatrix::new(
            self.rows,
            self.cols,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Multiplies row `i` by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<DataMatrix> {
        if factors.len() != self.rows {
            return Err(Error::mismatch(
                "scale_rows",
                self.shape(),
                (factors.len(), 1),
            ));
        }
        let mut values = self.values.clone();
        for (i, f) in factors.iter().enumerate() {
            for v in &mut values[i * self.cols..(i + 1) * self.cols] {
                *v *= f;
            }
        }
        DataMatrix::new(self.rows, self.cols, values)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Largest entrywise absolute difference; `INFINITY` on shape mismatch.
    pub fn max_abs_diff(&self, other: &DataMatrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// Compensated (Neumaier) summation.
pub fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Standard matrix product `lhs * rhs`.
pub fn matmul(lhs: &DataMatrix, rhs: &DataMatrix) -> Result<DataMatrix> {
    if lhs.cols != rhs.rows {
        return Err(Error::mismatch("matmul", lhs.shape(), rhs.shape()));
    }
    let (n, k, m) = (lhs.rows, lhs.cols, rhs.cols);
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let dst = &mut out[i * m..(i + 1) * m];
        for l in 0..k {
            let a = lhs.values[i * k + l];
            let src = &rhs.values[l * m..(l + 1) * m];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }
    // Products of finite matrices can still overflow.
    DataMatrix::new(n, m, out)
}

/// `lhs^T * lhs`, the column Gram matrix.
pub fn gram(m: &DataMatrix) -> DataMatrix {
    let c = m.cols;
    let mut out = vec![0.0; c * c];
    for row in m.iter_rows() {
        for a in 0..c {
            for b in a..c {
                out[a * c + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..c {
        for b in 0..a {
            out[a * c + b] = out[b * c + a];
        }
    }
    DataMatrix::from_parts(c, c, out)
}

/// Entrywise sum of absolute values.
pub fn l1_norm(m: &DataMatrix) -> f64 {
    stable_sum(m.values.iter().map(|v| v.abs()))
}

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Sorted in descending order.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector for `eigenvalues[i]`.
    pub eigenvectors: DataMatrix,
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigen(s: &DataMatrix) -> Result<SymmetricEigen> {
    let n = s.rows;
    if s.cols != n {
        return Err(Error::InvalidShape(format!(
            "symmetric_eigen needs a square matrix, got {}x{}",
            s.rows, s.cols
        )));
    }
    let scale = s.max_abs().max(1.0);
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((s.get(i, j) - s.get(j, i)).abs());
        }
    }
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }

    let mut a = s.values.clone();
    let mut v = DataMatrix::identity(n).values;
    let total = s.frobenius_norm();
    let off_norm = |a: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += a[i * n + j] * a[i * n + j];
                }
            }
        }
        acc.sqrt()
    };

    let mut converged = total == 0.0 || off_norm(&a) <= JACOBI_TOL * total;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence(JACOBI_MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                // A <- J^T A J with J the (p, q) rotation.
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
        converged = off_norm(&a) <= JACOBI_TOL * total;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = (0..n).map(|k| v[k * n + src]).collect();
        canonical_sign(&mut col);
        for k in 0..n {
            vectors[k * n + dst] = col[k];
        }
    }
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors: DataMatrix::from_parts(n, n, vectors),
    })
}

/// Flips `v` so its first non-negligible entry is nonnegative.
fn canonical_sign(v: &mut [f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let first = v.iter().find(|x| x.abs() > 1e-12 * scale).copied();
    if matches!(first, Some(f) if f < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
        true
    } else {
        false
    }
}

#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DataMatrix,
    pub singular_values: Vec<f64>,
    pub v: DataMatrix,
}

impl ThinSvd {
    /// The orthogonal polar factor `U V^T`.
    pub fn polar(&self) -> DataMatrix {
        matmul(&self.u, &self.v.transpose()).expect("conformable by construction")
    }
}

/// Thin SVD of a matrix with one or two columns, via the eigendecomposition
/// of its column Gram matrix.
pub fn thin_svd_p2(m: &DataMatrix) -> Result<ThinSvd> {
    let k = m.cols;
    if k == 0 || k > 2 {
        return Err(Error::Unsupported(format!(
            "thin_svd_p2 handles 1 or 2 columns, got {k}"
        )));
    }
    if m.rows < k {
        return Err(Error::InvalidShape(format!(
            "thin_svd_p2 needs at least {k} rows, got {}",
            m.rows
        )));
    }
    let eig = symmetric_eigen(&gram(m))?;
    let sigma: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let rank_tol = 1e-12 * sigma[0].max(f64::MIN_POSITIVE);
    let n = m.rows;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut v = eig.eigenvectors.column(i);
        let mut u = if sigma[i] > rank_tol && sigma[0] > 0.0 {
            let mut u: Vec<f64> = (0..n).map(|r| dot(m.row(r), &v) / sigma[i]).collect();
            orthonormalize_against(&mut u, &u_cols);
            u
        } else {
            complete_basis(n, &u_cols)
        };
        if canonical_sign(&mut u) {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        u_cols.push(u);
        v_cols.push(v);
    }
    let u = columns_to_matrix(n, &u_cols);
    let v = columns_to_matrix(k, &v_cols);
    let singular_values = sigma
        .iter()
        .map(|&s| {
            if s > rank_tol && sigma[0] > 0.0 {
                s
            } else {
                0.0
            }
        })
        .collect();
    Ok(ThinSvd {
        u,
        singular_values,
        v,
    })
}

fn orthonormalize_against(u: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let proj = dot(u, b);
        for (x, y) in u.iter_mut().zip(b) {
            *x -= proj * y;
        }
    }
    let norm = norm2(u);
    if norm > 0.0 {
        u.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Gram-Schmidt over canonical basis vectors, taking the first one that is
/// not (numerically) in the span of `basis`.
fn complete_basis(n: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        for b in basis {
            let proj = b[c];
            for (x, y) in e.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
        let norm = norm2(&e);
        if norm > 1e-8 {
            e.iter_mut().for_each(|x| *x /= norm);
            return e;
        }
    }
    unreachable!("basis of dimension < n always admits a completion")
}

fn columns_to_matrix(rows: usize, cols: &[Vec<f64>]) -> DataMatrix {
    let k = cols.len();
    let mut values = vec![0.0; rows * k];
    for (j, col) in cols.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            values[i * k + j] = *x;
        }
    }
    DataMatrix::from_parts(rows, k, values)
}

/// Solves the square system `a x = b` by LU with partial pivoting.
pub fn solve_linear(a: &DataMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows;
    if a.cols != n || b.len() != n {
        return Err(Error::mismatch("solve_linear", a.shape(), (b.len(), 1)));
    }
    let mut lu = a.values.clone();
    let mut x = b.to_vec();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| lu[i * n + col].abs().total_cmp(&lu[j * n + col].abs()))
            .expect("non-empty range");
        if lu[pivot * n + col].abs() <= 1e-13 * scale {
            return Err(Error::Singular);
        }
        if pivot != col {
            for k in 0..n {
                lu.swap(pivot * n + k, col * n + k);
            }
            x.swap(pivot, col);
        }
        let d = lu[col * n + col];
        for r in (col + 1)..n {
            let f = lu[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                lu[r * n + k] -= f * lu[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in (col + 1)..n {
            acc -= lu[col * n + k] * x[k];
        }
        x[col] = acc / lu[col * n + col];
    }
    Ok(x)
}
