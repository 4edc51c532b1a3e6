//! Dense row-major matrix kernels used by the optimizer.
//!
//! Everything here is single-threaded and allocation-explicit: each exported
//! operation takes its inputs by reference and returns a fresh [`Matrix`].
//! The three kernels CMA-ES needs are a general matrix product ([`gemm`]), a
//! symmetric eigendecomposition ([`eig_symmetric`]) and a symmetric rank-one
//! update ([`syr1`]).

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Maximum asymmetry accepted by [`eig_symmetric`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Relative floor applied to eigenvalues that come out negative through
/// round-off.
pub const EIGENVALUE_FLOOR: f64 = 1e-20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error("eigensolver did not converge within {rotations} rotations")]
    NoConvergence { rotations: usize },
    #[error("{op} produced a non-finite entry")]
    NonFinite { op: &'static str },
}

fn shape_err(op: &'static str, detail: String) -> LinalgError {
    LinalgError::Shape { op, detail }
}

/// Dense matrix of `f64` in row-major order.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Wraps a row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(shape_err(
                "from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(shape_err("from_rows", "ragged rows".to_string()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(shape_err("from_columns", "ragged columns".to_string()));
        }
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Returns `(M + Mᵀ) / 2`, which is symmetric bit for bit.
    pub fn symmetrized(&self) -> Matrix {
        debug_assert!(self.is_square());
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Largest element-wise absolute difference; `INFINITY` on shape mismatch.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.cols {
            return Err(shape_err(
                "matvec",
                format!("{}x{} times vector of {}", self.rows, self.cols, x.len()),
            ));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Computes `Mᵀ x`.
    pub fn matvec_transposed(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.rows {
            return Err(shape_err(
                "matvec_transposed",
                format!("({}x{})ᵀ times vector of {}", self.rows, self.cols, x.len()),
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Returns `alpha * a * b + beta * c`.
///
/// `c` is only read. When `beta == 0` its contents are ignored entirely, so
/// non-finite values in it do not leak into the result.
pub fn gemm(
    alpha: f64,
    a: &Matrix,
    b: &Matrix,
    beta: f64,
    c: &Matrix,
) -> Result<Matrix, LinalgError> {
    if a.cols != b.rows {
        return Err(shape_err(
            "gemm",
            format!(
                "inner dimensions {}x{} · {}x{}",
                a.rows, a.cols, b.rows, b.cols
            ),
        ));
    }
    if c.shape() != (a.rows, b.cols) {
        return Err(shape_err(
            "gemm",
            format!(
                "accumulator is {}x{}, product is {}x{}",
                c.rows, c.cols, a.rows, b.cols
            ),
        ));
    }
    let mut out = if beta == 0.0 {
        Matrix::zeros(a.rows, b.cols)
    } else {
        c.scale(beta)
    };
    if alpha != 0.0 {
        // i-k-j ordering keeps the inner loop on contiguous rows of b and out.
        for i in 0..a.rows {
            let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for k in 0..a.cols {
                let aik = alpha * a.data[i * a.cols + k];
                if aik == 0.0 {
                    continue;
                }
                let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
                for (o, bkj) in out_row.iter_mut().zip(b_row) {
                    *o += aik * bkj;
                }
            }
        }
    }
    if !out.is_finite() {
        return Err(LinalgError::NonFinite { op: "gemm" });
    }
    Ok(out)
}

/// Returns `c + alpha * v vᵀ`.
///
/// Only the upper triangle is computed and then mirrored, so the result is
/// symmetric bit for bit. `c` is assumed symmetric.
pub fn syr1(c: &Matrix, v: &[f64], alpha: f64) -> Result<Matrix, LinalgError> {
    if !c.is_square() || c.rows != v.len() {
        return Err(shape_err(
            "syr1",
            format!("{}x{} matrix with vector of {}", c.rows, c.cols, v.len()),
        ));
    }
    let n = v.len();
    let mut out = c.clone();
    for i in 0..n {
        for j in i..n {
            let upper = c[(i, j)] + alpha * v[i] * v[j];
            out[(i, j)] = upper;
            out[(j, i)] = upper;
        }
    }
    if !out.is_finite() {
        return Err(LinalgError::NonFinite { op: "syr1" });
    }
    Ok(out)
}

/// Orthonormal eigenvectors (as columns) and ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub vectors: Matrix,
    pub values: Vec<f64>,
}

impl EigenPair {
    /// `V · diag(values) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// The input must be symmetric within [`SYMMETRY_TOLERANCE`]; callers are
/// expected to symmetrize first. Rotations are capped at `100·n²`. Negative
/// eigenvalues (round-off on a PSD input) are raised to
/// `EIGENVALUE_FLOOR · max(values)`.
pub fn eig_symmetric(c: &Matrix) -> Result<EigenPair, LinalgError> {
    if !c.is_square() {
        return Err(shape_err(
            "eig_symmetric",
            format!("{}x{} is not square", c.rows, c.cols),
        ));
    }
    if !c.is_finite() {
        return Err(LinalgError::NonFinite {
            op: "eig_symmetric",
        });
    }
    let asym = c.max_asymmetry();
    if asym > SYMMETRY_TOLERANCE {
        return Err(LinalgError::NotSymmetric {
            max_asymmetry: asym,
        });
    }
    let n = c.rows;
    let mut a = c.symmetrized();
    let mut v = Matrix::identity(n);
    let cap = 100 * n * n;
    let mut rotations = 0usize;

    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Negligible against both diagonal entries: drop it.
                let g = 100.0 * apq.abs();
                if app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                if rotations >= cap {
                    return Err(LinalgError::NoConvergence { rotations });
                }
                rotations += 1;
                rotated = true;

                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = cs * akp - sn * akq;
                    a[(k, q)] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = cs * apk - sn * aqk;
                    a[(q, k)] = sn * apk + cs * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = cs * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + cs * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag = a.diagonal();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let mut values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }

    let max_value = values.iter().copied().fold(0.0, f64::max);
    let floor = EIGENVALUE_FLOOR * max_value;
    for value in values.iter_mut() {
        if *value < 0.0 {
            *value = floor;
        }
    }
    if !vectors.is_finite() || values.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite {
            op: "eig_symmetric",
        });
    }
    Ok(EigenPair { vectors, values })
}
