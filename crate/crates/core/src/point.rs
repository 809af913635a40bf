//! Dense column-major matrices used for iterates, gradients and directions.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A dense `rows × cols` real matrix stored column-major.
///
/// Vector problems use `cols == 1`. Entry `(i, j)` lives at `data[j * rows + i]`,
/// so each column is a contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<S> {
    data: Vec<S>,
    rows: usize,
    cols: usize,
}

impl<S: Scalar> Point<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![S::zero(); rows * cols],
            rows,
            cols,
        }
    }

    /// Builds a point from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter {
                name: "dims",
                reason: format!("rows and cols must be positive, got ({rows}, {cols})"),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: (rows, cols),
                actual: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point data"));
        }
        Ok(Self { data, rows, cols })
    }

    /// Column vector from a slice.
    pub fn vector(values: &[S]) -> Result<Self> {
        Self::from_col_major(values.len(), 1, values.to_vec())
    }

    /// Builds a matrix from a list of columns of equal length.
    pub fn from_columns(columns: &[&[S]]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidParameter {
                name: "columns",
                reason: "columns have unequal lengths".into(),
            });
        }
        let data = columns.iter().flat_map(|c| c.iter().copied()).collect();
        Self::from_col_major(rows, columns.len(), data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[S] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, j: usize) -> &mut [S] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: self.dims(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> S {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm_sq(&self) -> S {
        self.dot(self)
    }

    /// Euclidean (Frobenius) norm.
    pub fn norm(&self) -> S {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> S {
        self.data.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    pub fn distance(&self, other: &Self) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
            .sqrt()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: S, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + alpha * b;
        }
    }

    pub fn scale_mut(&mut self, alpha: S) {
        for a in &mut self.data {
            *a = *a * alpha;
        }
    }

    pub fn scaled(&self, alpha: S) -> Self {
        let mut out = self.clone();
        out.scale_mut(alpha);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(S::one(), other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-S::one(), other);
        out
    }

    /// Frank-Wolfe move: `self + step * (target - self)`.
    ///
    /// Written as `(1 - step) * x + step * v` so that `step == 1` lands exactly on `target`.
    pub fn step_toward(&self, target: &Self, step: S) -> Self {
        let keep = S::one() - step;
        let data = self
            .data
            .iter()
            .zip(&target.data)
            .map(|(&x, &v)| keep * x + step * v)
            .collect();
        Self {
            data,
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn fill(&mut self, v: S) {
        self.data.iter_mut().for_each(|a| *a = v);
    }

    pub fn cast<T: Scalar>(&self) -> Point<T> {
        Point {
            data: self.data.iter().map(|v| T::lit(v.to_f64_lossy())).collect(),
            rows: self.rows,
            cols: self.cols,
        }
    }
}
