use std::ops::{Index, IndexMut};

use faer::{MatMut, MatRef};
use serde::{Deserialize, Serialize};

use super::{C64, ONE, ZERO};

/// Dense complex matrix in column-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from column-major data; `None` if the length is wrong.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    /// Builds from real row-major nested rows. Panics on ragged input.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        assert!(rows.iter().all(|row| row.as_ref().len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| C64::new(rows[i].as_ref()[j], 0.0))
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in entries.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Outer product `u vᵀ` (unconjugated).
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    /// Reshapes a vector into the matrix `Z` with `vec(Z) = v`.
    pub fn unvec(v: &[C64], rows: usize) -> Self {
        assert!(rows > 0 && v.len() % rows == 0, "length not divisible by rows");
        Self {
            rows,
            cols: v.len() / rows,
            data: v.to_vec(),
        }
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

    /// Column-major entries, i.e. `vec(self)`.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_faer(&self) -> MatRef<'_, C64> {
        MatRef::from_column_major_slice(&self.data, self.rows, self.cols)
    }

    pub fn as_faer_mut(&mut self) -> MatMut<'_, C64> {
        MatMut::from_column_major_slice_mut(&mut self.data, self.rows, self.cols)
    }

    pub fn from_faer(m: MatRef<'_, C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn frobenius_norm(&self) -> f64 {
        super::norm2(&self.data)
    }

    /// Largest absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| self.col(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, alpha: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * alpha).collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: C64, other: &CMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn add(&self, other: &CMatrix) -> Self {
        let mut out = self.clone();
        out.add_scaled(ONE, other);
        out
    }

    pub fn sub(&self, other: &CMatrix) -> Self {
        let mut out = self.clone();
        out.add_scaled(-ONE, other);
        out
    }

    /// `self += u vᵀ` scaled by `alpha`.
    pub fn add_outer(&mut self, alpha: C64, u: &[C64], v: &[C64]) {
        assert_eq!((self.rows, self.cols), (u.len(), v.len()));
        for (j, vj) in v.iter().enumerate() {
            let s = alpha * vj;
            for (i, ui) in u.iter().enumerate() {
                self.data[j * self.rows + i] += s * ui;
            }
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "matvec dimension mismatch");
        let mut y = vec![ZERO; self.rows];
        for (j, xj) in x.iter().enumerate() {
            if *xj == ZERO {
                continue;
            }
            for (yi, a) in y.iter_mut().zip(self.col(j)) {
                *yi += a * xj;
            }
        }
        y
    }

    /// `selfᵀ x` (unconjugated).
    pub fn matvec_t(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, x.len(), "matvec_t dimension mismatch");
        (0..self.cols).map(|j| super::dot_t(self.col(j), x)).collect()
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        faer::linalg::matmul::matmul(
            out.as_faer_mut(),
            faer::Accum::Replace,
            self.as_faer(),
            other.as_faer(),
            ONE,
            faer::Par::Seq,
        );
        out
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let (p, q) = (other.rows, other.cols);
        let rows = self.rows * p;
        let mut out = CMatrix::zeros(rows, self.cols * q);
        self.kron_into(other, ONE, &mut out);
        out
    }

    /// `out += alpha * (self ⊗ other)`.
    pub fn kron_into(&self, other: &CMatrix, alpha: C64, out: &mut CMatrix) {
        let (p, q) = (other.rows, other.cols);
        assert_eq!(out.rows, self.rows * p);
        assert_eq!(out.cols, self.cols * q);
        let rows = out.rows;
        for j1 in 0..self.cols {
            for i1 in 0..self.rows {
                let a = alpha * self[(i1, j1)];
                if a == ZERO {
                    continue;
                }
                for j2 in 0..q {
                    let dst = (j1 * q + j2) * rows + i1 * p;
                    let src = other.col(j2);
                    for (o, b) in out.data[dst..dst + p].iter_mut().zip(src) {
                        *o += a * b;
                    }
                }
            }
        }
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}
