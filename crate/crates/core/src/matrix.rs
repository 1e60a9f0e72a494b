//! Dense row-major matrices.
//!
//! All products use a fixed `i-k-j` loop order so results are bit-identical
//! between runs regardless of how callers schedule work.

use std::ops::Index;

use crate::error::{Error, Result};
use crate::rng::Rng;

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// A general dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order, order);
        for i in 0..order {
            m.data[i * order + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diagonal: &[f64]) -> Self {
        let n = diagonal.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diagonal.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self * rhs`.
    ///
    /// # Panics
    ///
    /// Panics if the inner dimensions differ.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul inner dimensions {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let out_row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Matrix::from_raw(self.rows, rhs.cols, out)
    }

    /// `self * rhs` where `rhs` is given as a row-major `cols x rhs_cols` slice.
    pub(crate) fn matmul_slice(&self, rhs: &[f64], rhs_cols: usize) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.cols * rhs_cols);
        let mut out = vec![0.0; self.rows * rhs_cols];
        for i in 0..self.rows {
            let out_row = &mut out[i * rhs_cols..(i + 1) * rhs_cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(&rhs[k * rhs_cols..(k + 1) * rhs_cols]) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix::from_raw(
            self.rows,
            self.cols,
            self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        )
    }

    /// `self + value * I`.
    pub fn add_identity(&self, value: f64) -> Matrix {
        assert!(self.is_square());
        let mut m = self.clone();
        for i in 0..self.rows {
            m.data[i * self.cols + i] += value;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest `|a_ij - a_ji|`; infinite for non-square matrices.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// A Haar-distributed orthogonal matrix from the QR factorization of a
    /// Gaussian matrix, with signs fixed so that `R` has a positive diagonal.
    pub fn random_orthogonal(order: usize, rng: &mut Rng) -> Matrix {
        let gaussian = Matrix::from_raw(order, order, rng.normals(order * order));
        householder_q(&gaussian)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (row, col): (usize, usize)) -> &f64 {
        &self.data[row * self.cols + col]
    }
}

/// Orthogonal factor of a Householder QR, sign-normalized so diag(R) > 0.
fn householder_q(a: &Matrix) -> Matrix {
    let n = a.rows;
    let mut r = a.clone();
    let mut q = Matrix::identity(n);
    let mut v = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let norm = (k..n).map(|i| r.get(i, k).powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r.get(k, k) > 0.0 { -norm } else { norm };
        for i in 0..n {
            v[i] = if i < k { 0.0 } else { r.get(i, k) };
        }
        v[k] -= alpha;
        let vnorm2 = v[k..].iter().map(|x| x * x).sum::<f64>();
        if vnorm2 == 0.0 {
            continue;
        }
        // R <- H R, Q <- Q H with H = I - 2 v v^T / (v^T v)
        for j in 0..n {
            let dot = (k..n).map(|i| v[i] * r.get(i, j)).sum::<f64>();
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                let updated = r.get(i, j) - f * v[i];
                r.set(i, j, updated);
            }
        }
        for i in 0..n {
            let dot = (k..n).map(|j| q.get(i, j) * v[j]).sum::<f64>();
            let f = 2.0 * dot / vnorm2;
            for j in k..n {
                let updated = q.get(i, j) - f * v[j];
                q.set(i, j, updated);
            }
        }
    }
    for j in 0..n {
        if r.get(j, j) < 0.0 {
            for i in 0..n {
                let flipped = -q.get(i, j);
                q.set(i, j, flipped);
            }
        }
    }
    q
}

/// A square matrix with exactly symmetric storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    inner: Matrix,
}

impl SymmetricMatrix {
    /// Symmetrizes `(M + M^T) / 2` before storing.
    pub fn new(order: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_matrix(Matrix::new(order, order, data)?)
    }

    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidShape(format!(
                "symmetric matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        if let Some(index) = m.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(mut m: Matrix) -> Self {
        let n = m.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m.data[i * n + j] + m.data[j * n + i]);
                m.data[i * n + j] = avg;
                m.data[j * n + i] = avg;
            }
        }
        Self { inner: m }
    }

    pub fn identity(order: usize) -> Self {
        Self {
            inner: Matrix::identity(order),
        }
    }

    pub fn zeros(order: usize) -> Self {
        Self {
            inner: Matrix::zeros(order, order),
        }
    }

    pub fn from_diagonal(diagonal: &[f64]) -> Self {
        Self {
            inner: Matrix::from_diagonal(diagonal),
        }
    }

    pub fn order(&self) -> usize {
        self.inner.rows
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner.get(row, col)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.inner
    }

    pub fn into_matrix(self) -> Matrix {
        self.inner
    }

    pub fn as_slice(&self) -> &[f64] {
        self.inner.as_slice()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    pub fn scale(&self, factor: f64) -> SymmetricMatrix {
        Self {
            inner: self.inner.scale(factor),
        }
    }

    pub fn add_identity(&self, value: f64) -> SymmetricMatrix {
        Self {
            inner: self.inner.add_identity(value),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order()).map(|i| self.get(i, i)).collect()
    }

    /// `Q diag(values) Q^T`, symmetrized.
    pub fn from_eigen(q: &Matrix, values: &[f64]) -> SymmetricMatrix {
        let n = values.len();
        assert_eq!((q.rows, q.cols), (n, n));
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += q.get(i, k) * values[k] * q.get(j, k);
                }
                out[i * n + j] = acc;
                out[j * n + i] = acc;
            }
        }
        Self {
            inner: Matrix::from_raw(n, n, out),
        }
    }
}

impl Index<(usize, usize)> for SymmetricMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.inner[idx]
    }
}

/// Random symmetric positive definite matrix `Q diag(λ) Q^T` with each
/// `λ` uniform in `[eig_min, eig_max]` and `Q` Haar-orthogonal.
pub fn random_spd(order: usize, eig_min: f64, eig_max: f64, rng: &mut Rng) -> Result<SymmetricMatrix> {
    if order == 0 {
        return Err(Error::InvalidShape("order must be positive".into()));
    }
    if !(eig_min > 0.0 && eig_max >= eig_min && eig_max.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "need 0 < eig_min <= eig_max, got [{eig_min}, {eig_max}]"
        )));
    }
    let q = Matrix::random_orthogonal(order, rng);
    let eigenvalues: Vec<f64> = (0..order).map(|_| rng.uniform_in(eig_min, eig_max)).collect();
    Ok(SymmetricMatrix::from_eigen(&q, &eigenvalues))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::new(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b);
        assert_eq!(c.as_slice(), &[58.0, 64.0, 139.0, 154.0]);
        assert_eq!(a.matmul_slice(b.as_slice(), 2), c.into_vec());
    }

    #[test]
    fn symmetric_constructor_averages() {
        let s = SymmetricMatrix::new(2, vec![1.0, 2.0, 4.0, 3.0]).unwrap();
        assert_eq!(s.as_slice(), &[1.0, 3.0, 3.0, 3.0]);
        assert_eq!(s.as_matrix().asymmetry(), 0.0);
    }

    #[test]
    fn symmetric_rejects_nan_and_non_square() {
        assert_eq!(
            SymmetricMatrix::new(2, vec![1.0, f64::NAN, 0.0, 1.0]),
            Err(Error::NonFinite { index: 1 })
        );
        assert!(SymmetricMatrix::from_matrix(Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = Rng::new(11);
        for n in [1, 2, 5, 17, 40] {
            let q = Matrix::random_orthogonal(n, &mut rng);
            let err = q.transpose().matmul(&q).sub(&Matrix::identity(n)).frobenius_norm();
            assert!(err < 1e-12, "n={n} err={err}");
        }
    }

    #[test]
    fn random_spd_scalar_and_isotropic() {
        let mut rng = Rng::new(5);
        let s = random_spd(1, 4.0, 4.0, &mut rng).unwrap();
        assert_eq!(s.as_slice(), &[4.0]);

        let s = random_spd(3, 1.0, 1.0, &mut rng).unwrap();
        let err = s.as_matrix().sub(&Matrix::identity(3)).max_abs();
        assert!(err < 1e-14, "err={err}");
    }

    #[test]
    fn random_spd_rejects_bad_spectrum() {
        let mut rng = Rng::new(1);
        assert!(random_spd(3, 0.0, 1.0, &mut rng).is_err());
        assert!(random_spd(3, 2.0, 1.0, &mut rng).is_err());
        assert!(random_spd(0, 1.0, 1.0, &mut rng).is_err());
    }
}
