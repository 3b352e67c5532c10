//! Minimal dense linear algebra over `f64` slices.
//!
//! Matrices are row-major: entry `(i, j)` of an `r x c` matrix lives at
//! `data[i * c + j]`. Everything here is sized for the desk-scale predictor
//! models; no blocking, no SIMD.

use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;

/// Borrowed view of a row-major matrix.
#[derive(Debug, Clone, Copy)]
pub struct MatView<'a> {
    rows: usize,
    cols: usize,
    data: &'a [f64],
}

impl<'a> MatView<'a> {
    /// Wraps `data` as an `rows x cols` matrix. Panics if the length does
    /// not match; callers construct views from containers they sized.
    pub fn new(rows: usize, cols: usize, data: &'a [f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix view length mismatch");
        MatView { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &'a [f64] {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    fmath::sqrt(dot(v, v))
}

/// Returns `v / ||v||`, or `None` when the norm is exactly zero.
pub fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm2(v);
    if n == 0.0 {
        return None;
    }
    Some(v.iter().map(|x| x / n).collect())
}

/// Cosine similarity; `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = norm2(a);
    let nb = norm2(b);
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot(a, b) / (na * nb))
}

/// `out = M x` for a row-major `rows x cols` matrix.
pub fn matvec(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&m[i * cols..(i + 1) * cols], x);
    }
}

/// `out = M^T x` for a row-major `rows x cols` matrix.
pub fn matvec_t(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(out.len(), cols);
    out.fill(0.0);
    for i in 0..rows {
        let xi = x[i];
        let row = &m[i * cols..(i + 1) * cols];
        for (o, &mij) in out.iter_mut().zip(row.iter()) {
            *o += xi * mij;
        }
    }
}

/// Rank-one update `M += alpha * x y^T` on a row-major `rows x cols` matrix.
pub fn outer_acc(m: &mut [f64], rows: usize, cols: usize, alpha: f64, x: &[f64], y: &[f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(y.len(), cols);
    for i in 0..rows {
        let ax = alpha * x[i];
        let row = &mut m[i * cols..(i + 1) * cols];
        for (mij, &yj) in row.iter_mut().zip(y.iter()) {
            *mij += ax * yj;
        }
    }
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
}

/// Row-major identity matrix.
pub fn identity(dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = 1.0;
    }
    m
}
