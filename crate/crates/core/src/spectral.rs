//! Perron-Frobenius machinery for nonnegative matrices.
//!
//! For an irreducible nonnegative `M`, the eigenvalue with the largest real
//! part is real, simple and equal to `rho(M)`, with a strictly positive
//! eigenvector. Power iteration on `M + cI` (c > 0 makes the matrix primitive,
//! so periodic patterns such as bipartite graphs still converge) brackets the
//! root between the Collatz-Wielandt bounds `min_i (Mx)_i / x_i` and
//! `max_i (Mx)_i / x_i`; iteration stops once the bracket is narrower than
//! twice the tolerance.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{is_irreducible, strongly_connected_components, DirectedGraph};
use crate::linalg::{abs, exp, ln, Matrix};
use crate::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Tolerance used by [`spectral_abscissa`].
pub const ABSCISSA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    /// Dominant eigenvalue `rho(M)`.
    pub value: f64,
    /// Perron vector, strictly positive, with product of entries equal to one.
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `||M v - value v||_inf` for the returned vector.
    pub residual: f64,
}

fn check_nonnegative(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: m.cols(),
        });
    }
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let x = m[(i, j)];
            if !(x >= 0.0) || !x.is_finite() {
                return Err(Error::NegativeEntry { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Perron root and vector of a nonnegative irreducible matrix.
pub fn perron(m: &Matrix, tol: f64) -> Result<SpectralResult> {
    perron_with_limit(m, tol, DEFAULT_MAX_ITER)
}

pub fn perron_with_limit(m: &Matrix, tol: f64, max_iter: usize) -> Result<SpectralResult> {
    check_nonnegative(m)?;
    if !is_irreducible(m) {
        return Err(Error::NotIrreducible);
    }
    let n = m.rows();
    if n == 1 {
        return Ok(SpectralResult {
            value: m[(0, 0)],
            vector: vec![1.0],
            iterations: 0,
            residual: 0.0,
        });
    }

    let row_sums: Vec<f64> = (0..n).map(|i| m.row(i).iter().sum()).collect();
    let lo_sum = row_sums.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_sum = row_sums.iter().copied().fold(0.0, f64::max);
    // rho(M) lies in [lo_sum, hi_sum]; a shift of that order keeps the
    // iteration primitive without slowing it down much.
    let shift = 0.5 * (lo_sum + hi_sum);

    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let mut lower = lo_sum;
    let mut upper = hi_sum;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        m.mul_vec_into(&x, &mut y);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..n {
            y[i] += shift * x[i];
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        lower = lo - shift;
        upper = hi - shift;
        let scale = y.iter().copied().fold(0.0, f64::max);
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / scale;
        }
        let floor = 64.0 * f64::EPSILON * hi;
        if hi - lo <= (2.0 * tol).max(floor) {
            break;
        }
    }
    if upper - lower > (2.0 * tol).max(64.0 * f64::EPSILON * (upper + shift)) {
        return Err(Error::NoConvergence {
            iterations,
            gap: upper - lower,
        });
    }
    let value = 0.5 * (lower + upper);
    normalize_geometric(&mut x);
    let mx = m.mul_vec(&x);
    let residual = mx
        .iter()
        .zip(&x)
        .fold(0.0, |acc: f64, (a, b)| acc.max(abs(a - value * b)));
    Ok(SpectralResult {
        value,
        vector: x,
        iterations,
        residual,
    })
}

/// Rescales a positive vector so that the product of its entries is one.
pub fn normalize_geometric(x: &mut [f64]) {
    let mean_log = x.iter().map(|v| ln(*v)).sum::<f64>() / x.len() as f64;
    let g = exp(mean_log);
    x.iter_mut().for_each(|v| *v /= g);
}

/// Spectral radius of any nonnegative matrix: the largest Perron root over
/// the diagonal blocks of its strongly connected components.
pub fn spectral_radius_nonneg(m: &Matrix, tol: f64) -> Result<f64> {
    check_nonnegative(m)?;
    let mut best: f64 = 0.0;
    for comp in strongly_connected_components(m) {
        let k = comp.len();
        let mut block = Matrix::zeros(k, k);
        for (a, &i) in comp.iter().enumerate() {
            for (b, &j) in comp.iter().enumerate() {
                block[(a, b)] = m[(i, j)];
            }
        }
        best = best.max(perron(&block, tol)?.value);
    }
    Ok(best)
}

fn validate_rates(g: &DirectedGraph, beta: &[f64], delta: &[f64]) -> Result<()> {
    let n = g.node_count();
    for v in [beta, delta] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
    }
    if beta.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
        return Err(Error::InvalidArgument("infection rates must be finite and >= 0".into()));
    }
    if delta.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::InvalidArgument("recovery rates must be finite and > 0".into()));
    }
    Ok(())
}

/// `BA - D + shift I`.
pub fn shifted_system_matrix(g: &DirectedGraph, beta: &[f64], delta: &[f64], shift: f64) -> Matrix {
    let n = g.node_count();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for (j, a) in g.in_neighbors(i) {
            m[(i, j)] = beta[i] * a;
        }
        m[(i, i)] = shift - delta[i];
    }
    m
}

/// Real part of the dominant eigenvalue of `BA - D`, the quantity that must
/// stay below `-eps` for exponential decay at rate `eps`.
pub fn spectral_abscissa(g: &DirectedGraph, beta: &[f64], delta: &[f64]) -> Result<f64> {
    let shift = delta.iter().copied().fold(0.0, f64::max);
    spectral_abscissa_with_shift(g, beta, delta, shift)
}

/// As [`spectral_abscissa`] with an explicit diagonal shift, which must be at
/// least `max_i delta_i`.
pub fn spectral_abscissa_with_shift(g: &DirectedGraph, beta: &[f64], delta: &[f64], shift: f64) -> Result<f64> {
    validate_rates(g, beta, delta)?;
    if delta.iter().any(|&d| d > shift) {
        return Err(Error::InvalidArgument("shift must be at least max delta".into()));
    }
    let m = shifted_system_matrix(g, beta, delta, shift);
    Ok(spectral_radius_nonneg(&m, ABSCISSA_TOL)? - shift)
}
