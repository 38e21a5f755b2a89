//! Dense linear algebra for the damped normal equations.
//!
//! The damped pseudo-inverse `(JᵀJ + λI)⁻¹Jᵀ` is never formed. Instead the
//! Gramian and right-hand side are assembled once and the step is obtained
//! from a Cholesky factorization of `JᵀJ + λI`.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{check_param, Error, Result};

/// Row-major dense matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch {
                context: "matrix shape",
                expected: 1,
                found: 0,
            });
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix entries",
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                context: "matrix row length",
                expected: cols,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub(crate) fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        expect_len("matrix-vector product", self.cols, v.len())?;
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `selfᵀ · v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        expect_len("transposed matrix-vector product", self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`; zero for a zero matrix.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale == 0.0 || self.rows != self.cols {
            return if self.rows == self.cols {
                0.0
            } else {
                f64::INFINITY
            };
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of bounds"
        );
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of bounds"
        );
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| self.row(i)).collect();
        f.debug_struct("DenseMatrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("entries", &rows)
            .finish()
    }
}

/// Normal equations `(JᵀJ + λI) d = Jᵀr`.
#[derive(Debug, Clone, PartialEq)]
pub struct DampedSystem {
    pub gramian: DenseMatrix,
    pub rhs: Vec<f64>,
    pub lambda: f64,
}

impl DampedSystem {
    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        check_param(
            lambda >= 0.0 && lambda.is_finite(),
            "lambda",
            "lambda >= 0",
            lambda,
        )?;
        self.lambda = lambda;
        Ok(self)
    }

    /// Solves the system by Cholesky factorization of `JᵀJ + λI`.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let mut a = self.gramian.clone();
        for i in 0..a.rows() {
            a[(i, i)] += self.lambda;
        }
        let l = cholesky(a)?;
        Ok(cholesky_solve(&l, &self.rhs))
    }
}

/// Assembles `JᵀJ` and `Jᵀr` with `lambda = 0`.
pub fn gramian_and_rhs(j: &DenseMatrix, r: &[f64]) -> Result<DampedSystem> {
    expect_len("residual vector", j.rows(), r.len())?;
    let n = j.cols();
    let mut g = DenseMatrix::zeros(n, n);
    for i in 0..j.rows() {
        let row = j.row(i);
        for a in 0..n {
            for b in a..n {
                g[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    Ok(DampedSystem {
        gramian: g,
        rhs: j.tr_mul_vec(r)?,
        lambda: 0.0,
    })
}

/// Returns `d` solving `(JᵀJ + λI) d = Jᵀr`. The caller applies `x − d`.
pub fn damped_normal_solve(j: &DenseMatrix, r: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if j.rows() < j.cols() {
        return Err(Error::DimensionMismatch {
            context: "jacobian rows (m >= n)",
            expected: j.cols(),
            found: j.rows(),
        });
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("residual vector"));
    }
    gramian_and_rhs(j, r)?.with_lambda(lambda)?.solve()
}

/// Lower Cholesky factor of a symmetric matrix. Pivots at or below
/// `n · ε · max diag` are reported as singular.
fn cholesky(mut a: DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    let max_diag = (0..n).fold(0.0_f64, |m, i| m.max(a[(i, i)].abs()));
    let tol = n as f64 * f64::EPSILON * max_diag;
    for k in 0..n {
        let mut d = a[(k, k)];
        for p in 0..k {
            d -= a[(k, p)] * a[(k, p)];
        }
        if !d.is_finite() || d <= tol {
            return Err(Error::SingularSystem { pivot: k });
        }
        let d = d.sqrt();
        a[(k, k)] = d;
        for i in (k + 1)..n {
            let mut s = a[(i, k)];
            for p in 0..k {
                s -= a[(i, p)] * a[(k, p)];
            }
            a[(i, k)] = s / d;
        }
        for j in (k + 1)..n {
            a[(k, j)] = 0.0;
        }
    }
    Ok(a)
}

fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for p in 0..i {
            y[i] -= l[(i, p)] * y[p];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for p in (i + 1)..n {
            y[i] -= l[(p, i)] * y[p];
        }
        y[i] /= l[(i, i)];
    }
    y
}

pub(crate) fn expect_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
