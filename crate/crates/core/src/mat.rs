//! Minimal dense row-major matrix used for iterates, caches and the dense
//! oracle. Sizes here are desk scale, so everything is straightforward
//! triple-loop arithmetic with cache-friendly inner loops.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

#[allow(unused_imports)]
use num_traits::Float;

/// Dense `rows x cols` matrix of `f64`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Wraps a row-major buffer; `data.len()` must equal `rows * cols`.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "flat buffer has wrong length");
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * b`.
    pub fn matmul(&self, b: &Mat) -> Mat {
        assert_eq!(self.cols, b.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            let arow = self.row(i);
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (k, &aik) in arow.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let brow = b.row(k);
                for j in 0..b.cols {
                    orow[j] += aik * brow[j];
                }
            }
        }
        out
    }

    /// `self^T * b`; `self` and `b` must have the same row count.
    pub fn t_matmul(&self, b: &Mat) -> Mat {
        assert_eq!(self.rows, b.rows, "t_matmul shape mismatch");
        let mut out = Mat::zeros(self.cols, b.cols);
        for i in 0..self.rows {
            let arow = self.row(i);
            let brow = b.row(i);
            for (k, &aik) in arow.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let orow = &mut out.data[k * b.cols..(k + 1) * b.cols];
                for j in 0..b.cols {
                    orow[j] += aik * brow[j];
                }
            }
        }
        out
    }

    /// `self * b^T`; column counts must agree.
    pub fn matmul_nt(&self, b: &Mat) -> Mat {
        assert_eq!(self.cols, b.cols, "matmul_nt shape mismatch");
        Mat::from_fn(self.rows, b.rows, |i, j| dot(self.row(i), b.row(j)))
    }

    /// `y^T diag(d) y`, the weighted Gramian; `d.len()` must equal `y.rows()`.
    pub fn gram_weighted(y: &Mat, d: &[f64]) -> Mat {
        assert_eq!(d.len(), y.rows);
        let k = y.cols;
        let mut c = Mat::zeros(k, k);
        for i in 0..y.rows {
            let w = d[i];
            if w == 0.0 {
                continue;
            }
            let yi = y.row(i);
            for a in 0..k {
                let s = w * yi[a];
                let crow = &mut c.data[a * k..(a + 1) * k];
                for b in a..k {
                    crow[b] += s * yi[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                c[(a, b)] = c[(b, a)];
            }
        }
        c
    }

    /// `w^T y` as a vector of length `y.cols()`.
    pub fn weighted_col_sums(y: &Mat, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), y.rows);
        let mut out = vec![0.0; y.cols];
        for i in 0..y.rows {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(y.row(i)) {
                *o += wi * v;
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// Left-multiplication by `diag(d)`.
    pub fn scale_rows(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.rows);
        for i in 0..self.rows {
            let s = d[i];
            for v in self.row_mut(i) {
                *v *= s;
            }
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Mat, s: f64) {
        assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
        assert_eq!(a.data.len(), b.data.len());
        a.data
            .iter()
            .zip(&b.data)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
