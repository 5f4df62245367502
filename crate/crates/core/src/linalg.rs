//! Dense linear algebra for the small systems this crate solves, plus the
//! handful of transcendental functions `core` does not provide.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::{Error, Result};

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
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

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    /// `out = self * x`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// Adds `scale * v v^T` restricted to the given sparse support.
    pub(crate) fn add_sparse_outer(&mut self, idx: &[(usize, f64)], scale: f64) {
        for &(i, a) in idx {
            for &(j, b) in idx {
                self[(i, j)] += scale * a * b;
            }
        }
    }

    /// `B^T self B` for a `self.rows x k` basis `B`.
    pub fn congruence(&self, basis: &Matrix) -> Matrix {
        let n = self.rows;
        let k = basis.cols;
        // tmp = self * B  (n x k)
        let mut tmp = Matrix::zeros(n, k);
        for i in 0..n {
            let row = self.row(i);
            for (l, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let brow = basis.row(l);
                let trow = &mut tmp.data[i * k..(i + 1) * k];
                for (t, &b) in trow.iter_mut().zip(brow) {
                    *t += a * b;
                }
            }
        }
        let mut out = Matrix::zeros(k, k);
        for i in 0..n {
            let brow = basis.row(i);
            let trow = tmp.row(i);
            for (p, &bp) in brow.iter().enumerate() {
                if bp == 0.0 {
                    continue;
                }
                let orow = &mut out.data[p * k..(p + 1) * k];
                for (o, &t) in orow.iter_mut().zip(trow) {
                    *o += bp * t;
                }
            }
        }
        out
    }

    /// `B^T v`.
    pub fn transpose_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &b) in out.iter_mut().zip(self.row(i)) {
                *o += b * vi;
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.rows;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Singular);
            }
            let djj = sqrt(d);
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    /// Factors `a + tau I`, raising `tau` from zero until the factorization
    /// succeeds. Returns the factor and the shift that was used.
    pub fn factor_regularized(a: &Matrix) -> Result<(Self, f64)> {
        if let Ok(c) = Self::factor(a) {
            return Ok((c, 0.0));
        }
        let n = a.rows;
        let scale = (0..n).map(|i| abs(a[(i, i)])).fold(0.0, f64::max).max(1.0);
        let mut tau = 1e-12 * scale;
        let mut shifted = a.clone();
        for _ in 0..40 {
            for i in 0..n {
                shifted[(i, i)] = a[(i, i)] + tau;
            }
            if let Ok(c) = Self::factor(&shifted) {
                return Ok((c, tau));
            }
            tau *= 10.0;
        }
        Err(Error::Singular)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        y
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(abs(*x)))
}

/// Orthonormal description of an affine set `{y : C y = d}`.
#[derive(Debug, Clone)]
pub struct AffineSubspace {
    /// Orthonormal rows spanning the row space of `C`, with matching right-hand sides.
    row_basis: Vec<(Vec<f64>, f64)>,
    /// `dim x (dim - rank)` matrix with orthonormal columns spanning `ker C`.
    null_basis: Matrix,
}

impl AffineSubspace {
    /// Builds the description from dense rows `(c, d)`. Inconsistent systems
    /// return `None`.
    pub fn new(dim: usize, rows: &[(Vec<f64>, f64)]) -> Option<Self> {
        let mut row_basis: Vec<(Vec<f64>, f64)> = Vec::new();
        for (c, d) in rows {
            let scale = norm2(c).max(abs(*d)).max(1.0);
            let mut v = c.clone();
            let mut rhs = *d;
            // Two passes of Gram-Schmidt.
            for _ in 0..2 {
                for (q, e) in &row_basis {
                    let p = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
                    rhs -= p * e;
                }
            }
            let nv = norm2(&v);
            if nv <= 1e-10 * scale {
                if abs(rhs) > 1e-8 * scale {
                    return None;
                }
                continue;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            row_basis.push((v, rhs / nv));
        }

        // Pivoted Gram-Schmidt on the columns of the projector I - Q^T Q.
        let k = dim - row_basis.len();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut candidates: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                for (q, _) in &row_basis {
                    let p = q[i];
                    e.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
                }
                e
            })
            .collect();
        while cols.len() < k {
            let (best, _) = candidates
                .iter()
                .enumerate()
                .map(|(i, c)| (i, norm2(c)))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            let mut v = candidates.swap_remove(best);
            for _ in 0..2 {
                for q in row_basis.iter().map(|(q, _)| q).chain(cols.iter()) {
                    let p = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
                }
            }
            let nv = norm2(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            for c in candidates.iter_mut() {
                let p = dot(&v, c);
                c.iter_mut().zip(&v).for_each(|(x, y)| *x -= p * y);
            }
            cols.push(v);
        }
        let mut null_basis = Matrix::zeros(dim, k);
        for (j, c) in cols.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                null_basis[(i, j)] = x;
            }
        }
        Some(Self {
            row_basis,
            null_basis,
        })
    }

    pub fn null_basis(&self) -> &Matrix {
        &self.null_basis
    }

    pub fn rank(&self) -> usize {
        self.row_basis.len()
    }

    /// Orthogonal projection of `y` onto the affine set.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        for (q, e) in &self.row_basis {
            let r = dot(q, &out) - e;
            out.iter_mut().zip(q).for_each(|(x, v)| *x -= r * v);
        }
        out
    }

    /// Removes the component of `g` lying in the row space.
    pub fn project_onto_kernel(&self, g: &[f64]) -> Vec<f64> {
        let mut out = g.to_vec();
        for (q, _) in &self.row_basis {
            let r = dot(q, &out);
            out.iter_mut().zip(q).for_each(|(x, v)| *x -= r * v);
        }
        out
    }
}
