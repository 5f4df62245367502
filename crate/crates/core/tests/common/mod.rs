#![allow(dead_code)]

use nalgebra::DMatrix;
use sisalloc_core::centralized::AllocationProblem;
use sisalloc_core::costs::{CostKind, CostModel, NodeBounds, RateBounds};
use sisalloc_core::graph::{random_strongly_connected, DirectedGraph, WeightRange};
use sisalloc_core::linalg::Matrix;
use sisalloc_core::spectral::spectral_radius_nonneg;

pub fn weighted_graph(n: usize, p: f64, seed: u64) -> DirectedGraph {
    random_strongly_connected(n, p, seed, WeightRange { lo: 0.5, hi: 1.5 }).unwrap()
}

pub fn unit_graph(n: usize, p: f64, seed: u64) -> DirectedGraph {
    random_strongly_connected(n, p, seed, WeightRange::default()).unwrap()
}

/// Bounds `delta in [0.025, 0.75]`, `beta_hi = 4 * 0.25 / rho(A)`,
/// `beta_lo = 0.26 * beta_hi`.
pub fn threshold_bounds(g: &DirectedGraph) -> NodeBounds {
    let radius = spectral_radius_nonneg(g.adjacency(), 1e-12).unwrap();
    let beta_hi = 1.0 / radius;
    NodeBounds::new(0.26 * beta_hi, beta_hi, 0.025, 0.75).unwrap()
}

pub fn problem(g: DirectedGraph, eps_bar: f64) -> AllocationProblem {
    let b = threshold_bounds(&g);
    let cost = CostModel::new(CostKind::NormalizedQuasiconvex, RateBounds::shared(g.node_count(), b));
    AllocationProblem::new(g, cost, eps_bar).unwrap()
}

pub fn to_dense(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Largest real part of the eigenvalues.
pub fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// `diag(beta) A - diag(delta)` as a dense matrix.
pub fn system_matrix(g: &DirectedGraph, beta: &[f64], delta: &[f64]) -> DMatrix<f64> {
    let n = g.node_count();
    DMatrix::from_fn(n, n, |i, j| beta[i] * g.weight(i, j) - if i == j { delta[i] } else { 0.0 })
}
