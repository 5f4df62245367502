//! The allocation problem as a geometric program in log coordinates.
//!
//! With `D~ = max(eps_bar, delta_hi_i)`, `C = D~ + 1 - eps_bar` and the
//! substituted recovery variable `d~_i = D~ + 1 - delta_i`, decay at rate
//! `eps_bar` is implied by a positive `u` with
//!
//! ```text
//! (beta_i sum_j a_ij u_j + d~_i u_i) / (C u_i) <= 1    for every node i
//! ```
//!
//! because that is `(BA - D) u <= -eps_bar u` componentwise. Taking
//! `y_u = log u`, `y_beta = log beta` and `y_dt = log d~` turns each row into
//! a log-sum-exp constraint. Variables are laid out per node as
//! `(y_u_i, y_beta_i, y_dt_i)`; `sum_i y_u_i = 0` pins the scale of `u`.

use alloc::vec;
use alloc::vec::Vec;

use crate::convex::{self, AffineRow, ConvexProgram, ExpTerm, LogSumExp, Objective, SolveReport, SolveStatus};
use crate::costs::{log_chain, CostModel, RateBounds};
use crate::graph::DirectedGraph;
use crate::linalg::{exp, ln, Matrix};
use crate::spectral::{shifted_system_matrix, spectral_abscissa, spectral_radius_nonneg, ABSCISSA_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    pub graph: DirectedGraph,
    pub cost: CostModel,
    pub eps_bar: f64,
}

impl AllocationProblem {
    pub fn new(graph: DirectedGraph, cost: CostModel, eps_bar: f64) -> Result<Self> {
        if cost.node_count() != graph.node_count() {
            return Err(Error::DimensionMismatch {
                expected: graph.node_count(),
                found: cost.node_count(),
            });
        }
        if !(eps_bar > 0.0 && eps_bar.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("eps_bar must be positive, got {eps_bar}")));
        }
        if !graph.is_strongly_connected() {
            return Err(Error::NotIrreducible);
        }
        Ok(Self { graph, cost, eps_bar })
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn bounds(&self) -> &RateBounds {
        &self.cost.bounds
    }

    pub fn with_eps_bar(&self, eps_bar: f64) -> Result<Self> {
        Self::new(self.graph.clone(), self.cost.clone(), eps_bar)
    }
}

/// Constants and variable layout of the built program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpBuild {
    pub n: usize,
    /// `D~ = max(eps_bar, delta_hi_i)`.
    pub delta_tilde_shift: f64,
    /// `log(D~ + 1 - eps_bar)`.
    pub log_c: f64,
}

impl GpBuild {
    pub fn for_problem(prob: &AllocationProblem) -> Self {
        let shift = prob.eps_bar.max(prob.bounds().max_delta_hi());
        Self {
            n: prob.node_count(),
            delta_tilde_shift: shift,
            log_c: ln(shift + 1.0 - prob.eps_bar),
        }
    }

    pub fn dim(&self) -> usize {
        3 * self.n
    }

    pub fn u(i: usize) -> usize {
        3 * i
    }

    pub fn beta(i: usize) -> usize {
        3 * i + 1
    }

    pub fn delta_tilde(i: usize) -> usize {
        3 * i + 2
    }

    /// `log d~` for a recovery rate.
    pub fn y_delta_tilde(&self, delta: f64) -> f64 {
        ln(self.delta_tilde_shift + 1.0 - delta)
    }

    /// Recovery rate from `log d~`.
    pub fn delta_of(&self, y_dt: f64) -> f64 {
        self.delta_tilde_shift + 1.0 - exp(y_dt)
    }

    /// Rates `(beta, delta)` encoded in a full variable vector.
    pub fn rates(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let beta = (0..self.n).map(|i| exp(y[Self::beta(i)])).collect();
        let delta = (0..self.n).map(|i| self.delta_of(y[Self::delta_tilde(i)])).collect();
        (beta, delta)
    }

    /// Spectral constraint of node `i`. `u_of(j)` and `beta_idx`/`dt_idx`
    /// give the variable indices, so agents can reuse it on their own layout.
    pub fn node_constraint(
        &self,
        graph: &DirectedGraph,
        i: usize,
        u_of: impl Fn(usize) -> usize,
        beta_idx: usize,
        dt_idx: usize,
    ) -> LogSumExp {
        let mut terms: Vec<ExpTerm> = graph
            .in_neighbors(i)
            .map(|(j, a)| {
                let coeffs = if j == i {
                    vec![(beta_idx, 1.0)]
                } else {
                    vec![(beta_idx, 1.0), (u_of(j), 1.0), (u_of(i), -1.0)]
                };
                ExpTerm::new(coeffs, ln(a) - self.log_c)
            })
            .collect();
        terms.push(ExpTerm::new(vec![(dt_idx, 1.0)], -self.log_c));
        LogSumExp::new(terms)
    }

    /// Log-domain box of `(y_beta, y_dt)` for node `i`.
    pub fn node_box(&self, bounds: &RateBounds, i: usize) -> [(f64, f64); 2] {
        let b = bounds.node(i);
        [
            (ln(b.beta.lo), ln(b.beta.hi)),
            (self.y_delta_tilde(b.delta.hi), self.y_delta_tilde(b.delta.lo)),
        ]
    }
}

/// `sum_i f_i(e^{y_beta_i}) + g_i(D~ + 1 - e^{y_dt_i})`.
#[derive(Debug, Clone)]
pub struct GpObjective {
    pub cost: CostModel,
    pub delta_tilde_shift: f64,
}

/// Cost of one node and its derivatives in `(y_beta, y_dt)`.
pub fn node_cost(cost: &CostModel, shift: f64, i: usize, y_beta: f64, y_dt: f64) -> (f64, [f64; 2], [f64; 2]) {
    let beta = exp(y_beta);
    let f = log_chain(cost.vaccine_derivs(i, beta), beta);
    let e = exp(y_dt);
    let g = cost.antidote_derivs(i, shift + 1.0 - e);
    (
        f.value + g.value,
        [f.first, -g.first * e],
        [f.second, g.second * e * e - g.first * e],
    )
}

impl Objective for GpObjective {
    fn value(&self, y: &[f64]) -> f64 {
        (0..self.cost.node_count())
            .map(|i| node_cost(&self.cost, self.delta_tilde_shift, i, y[GpBuild::beta(i)], y[GpBuild::delta_tilde(i)]).0)
            .sum()
    }

    fn eval(&self, y: &[f64], grad: &mut [f64], hess: &mut Matrix) -> f64 {
        let mut total = 0.0;
        for i in 0..self.cost.node_count() {
            let (b, d) = (GpBuild::beta(i), GpBuild::delta_tilde(i));
            let (v, g, h) = node_cost(&self.cost, self.delta_tilde_shift, i, y[b], y[d]);
            total += v;
            grad[b] += g[0];
            grad[d] += g[1];
            hess[(b, b)] += h[0];
            hess[(d, d)] += h[1];
        }
        total
    }
}

pub fn build_gp(prob: &AllocationProblem) -> (GpBuild, ConvexProgram<GpObjective>) {
    let build = GpBuild::for_problem(prob);
    let n = build.n;
    let objective = GpObjective {
        cost: prob.cost.clone(),
        delta_tilde_shift: build.delta_tilde_shift,
    };
    let mut prog = ConvexProgram::new(build.dim(), objective);
    for i in 0..n {
        prog.inequalities
            .push(build.node_constraint(&prob.graph, i, GpBuild::u, GpBuild::beta(i), GpBuild::delta_tilde(i)));
        let [(blo, bhi), (dlo, dhi)] = build.node_box(prob.bounds(), i);
        prog.lower[GpBuild::beta(i)] = blo;
        prog.upper[GpBuild::beta(i)] = bhi;
        prog.lower[GpBuild::delta_tilde(i)] = dlo;
        prog.upper[GpBuild::delta_tilde(i)] = dhi;
    }
    prog.equalities
        .push(AffineRow::new((0..n).map(|i| (GpBuild::u(i), 1.0)).collect(), 0.0));
    (build, prog)
}

/// `u = 1` and every rate at the log-domain midpoint of its box.
pub fn initial_point(build: &GpBuild, prob: &AllocationProblem) -> Vec<f64> {
    let mut y = vec![0.0; build.dim()];
    for i in 0..build.n {
        let [(blo, bhi), (dlo, dhi)] = build.node_box(prob.bounds(), i);
        y[GpBuild::beta(i)] = 0.5 * (blo + bhi);
        y[GpBuild::delta_tilde(i)] = 0.5 * (dlo + dhi);
    }
    y
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub total_cost: f64,
    /// `lambda_1(BA - D)`.
    pub abscissa: f64,
}

impl Allocation {
    /// Clamps the rates into their boxes (undoing `exp(ln(.))` rounding) and
    /// evaluates cost and abscissa.
    pub fn assemble(prob: &AllocationProblem, mut beta: Vec<f64>, mut delta: Vec<f64>) -> Result<Self> {
        for (i, b) in prob.bounds().iter().enumerate() {
            beta[i] = beta[i].clamp(b.beta.lo, b.beta.hi);
            delta[i] = delta[i].clamp(b.delta.lo, b.delta.hi);
        }
        let total_cost = prob.cost.total(&beta, &delta)?;
        let abscissa = spectral_abscissa(&prob.graph, &beta, &delta)?;
        Ok(Self {
            beta,
            delta,
            total_cost,
            abscissa,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralSolution {
    pub allocation: Allocation,
    pub build: GpBuild,
    /// Optimal `log u`, summing to zero.
    pub y_u: Vec<f64>,
    pub report: SolveReport,
}

/// Solves the allocation problem to barrier gap `tol`.
///
/// The cheapest-to-stabilize corner `(beta_lo, delta_hi)` minimizes
/// `lambda_1(BA - D)` over the box, so the problem is infeasible exactly
/// when that corner misses `-eps_bar`; this is checked before solving.
pub fn solve_centralized(prob: &AllocationProblem, tol: f64) -> Result<CentralSolution> {
    let best = corner_abscissa(prob, Bound::Lo, Bound::Hi)?;
    if best > -prob.eps_bar {
        return Err(Error::Infeasible {
            phase_one_value: best + prob.eps_bar,
        });
    }
    let (build, prog) = build_gp(prob);
    let report = convex::solve(&prog, &initial_point(&build, prob), tol)?;
    if report.status == SolveStatus::MaxIter {
        return Err(Error::MaxIterations {
            iterations: report.iterations,
        });
    }
    let (beta, delta) = build.rates(&report.minimizer);
    let allocation = Allocation::assemble(prob, beta, delta)?;
    let y_u = (0..build.n).map(|i| report.minimizer[GpBuild::u(i)]).collect();
    Ok(CentralSolution {
        allocation,
        build,
        y_u,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lo,
    Hi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub beta: Bound,
    pub delta: Bound,
    /// `lambda_1(BA - D)`.
    pub abscissa: f64,
    /// `rho(BA + I - D)`, which equals `1 + abscissa`.
    pub shifted_radius: f64,
}

impl Corner {
    pub fn violates(&self, eps_bar: f64) -> bool {
        self.abscissa > -eps_bar
    }
}

/// The four bound corners in the order `(beta_lo, delta_lo)`,
/// `(beta_hi, delta_hi)`, `(beta_lo, delta_hi)`, `(beta_hi, delta_lo)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerReport {
    pub corners: [Corner; 4],
    pub eps_bar: f64,
}

fn corner_rates(prob: &AllocationProblem, b: Bound, d: Bound) -> (Vec<f64>, Vec<f64>) {
    let pick = |lo: f64, hi: f64, which: Bound| if which == Bound::Lo { lo } else { hi };
    let beta = prob.bounds().iter().map(|x| pick(x.beta.lo, x.beta.hi, b)).collect();
    let delta = prob.bounds().iter().map(|x| pick(x.delta.lo, x.delta.hi, d)).collect();
    (beta, delta)
}

fn corner_abscissa(prob: &AllocationProblem, b: Bound, d: Bound) -> Result<f64> {
    let (beta, delta) = corner_rates(prob, b, d);
    spectral_abscissa(&prob.graph, &beta, &delta)
}

pub fn feasibility_report(prob: &AllocationProblem) -> Result<CornerReport> {
    let order = [
        (Bound::Lo, Bound::Lo),
        (Bound::Hi, Bound::Hi),
        (Bound::Lo, Bound::Hi),
        (Bound::Hi, Bound::Lo),
    ];
    let mut corners = [Corner {
        beta: Bound::Lo,
        delta: Bound::Lo,
        abscissa: 0.0,
        shifted_radius: 0.0,
    }; 4];
    for (slot, (b, d)) in corners.iter_mut().zip(order) {
        let (beta, delta) = corner_rates(prob, b, d);
        let abscissa = spectral_abscissa(&prob.graph, &beta, &delta)?;
        let shifted = shifted_system_matrix(&prob.graph, &beta, &delta, 1.0);
        *slot = Corner {
            beta: b,
            delta: d,
            abscissa,
            shifted_radius: spectral_radius_nonneg(&shifted, ABSCISSA_TOL)?,
        };
    }
    Ok(CornerReport {
        corners,
        eps_bar: prob.eps_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{CostKind, NodeBounds};

    fn problem(graph: DirectedGraph, bounds: NodeBounds, eps_bar: f64) -> AllocationProblem {
        let n = graph.node_count();
        let cost = CostModel::new(CostKind::NormalizedQuasiconvex, RateBounds::shared(n, bounds));
        AllocationProblem::new(graph, cost, eps_bar).unwrap()
    }

    #[test]
    fn single_node_needs_recovery_above_eps() {
        let prob = problem(DirectedGraph::empty(1), NodeBounds::new(0.1, 0.4, 0.05, 0.6).unwrap(), 0.3);
        let (build, prog) = build_gp(&prob);
        assert_eq!(prog.inequalities.len(), 1);
        assert_eq!(prog.inequalities[0].terms.len(), 1);
        // Constraint is d~ <= D~ + 1 - eps, i.e. delta >= eps.
        let mut y = initial_point(&build, &prob);
        y[2] = build.y_delta_tilde(0.3);
        assert!(prog.inequalities[0].value(&y).abs() < 1e-12);
        let sol = solve_centralized(&prob, 1e-9).unwrap();
        assert!((sol.allocation.delta[0] - 0.3).abs() < 1e-6);
        assert!((sol.allocation.beta[0] - 0.4).abs() < 1e-6);
    }

    #[test]
    fn symmetric_two_cycle_has_symmetric_optimum() {
        let prob = problem(DirectedGraph::cycle(2), NodeBounds::new(0.1, 0.4, 0.025, 0.75).unwrap(), 0.2);
        let sol = solve_centralized(&prob, 1e-10).unwrap();
        let a = &sol.allocation;
        assert!((a.beta[0] - a.beta[1]).abs() < 1e-6);
        assert!((a.delta[0] - a.delta[1]).abs() < 1e-6);
        assert!(a.abscissa <= -0.2 + 1e-6);
        assert!(a.total_cost > 0.0 && a.total_cost < 4.0);
        assert!((sol.report.objective_value - a.total_cost).abs() < 1e-8);
    }

    #[test]
    fn huge_eps_is_infeasible() {
        let prob = problem(DirectedGraph::cycle(3), NodeBounds::new(0.1, 0.4, 0.025, 0.75).unwrap(), 5.0);
        assert!(matches!(solve_centralized(&prob, 1e-8), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn degenerate_box_has_equal_corners() {
        let prob = problem(DirectedGraph::cycle(3), NodeBounds::new(0.2, 0.2, 0.5, 0.5).unwrap(), 0.1);
        let r = feasibility_report(&prob).unwrap();
        assert!(r.corners.iter().all(|c| c.abscissa == r.corners[0].abscissa));
        assert!((r.corners[0].shifted_radius - (1.0 + r.corners[0].abscissa)).abs() < 1e-10);
    }

    #[test]
    fn two_cycle_constraints_swap_symmetrically() {
        let prob = problem(DirectedGraph::cycle(2), NodeBounds::new(0.1, 0.4, 0.025, 0.75).unwrap(), 0.2);
        let (_, prog) = build_gp(&prob);
        let y = [0.3, -1.2, 0.4, -0.3, -1.5, 0.2];
        let swapped = [y[3], y[4], y[5], y[0], y[1], y[2]];
        let h0 = prog.inequalities[0].value(&y);
        let h1 = prog.inequalities[1].value(&swapped);
        assert!((h0 - h1).abs() < 1e-14);
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let prob = problem(DirectedGraph::cycle(2), NodeBounds::new(0.1, 0.4, 0.025, 0.75).unwrap(), 0.2);
        let (build, prog) = build_gp(&prob);
        let y = initial_point(&build, &prob);
        let mut g = vec![0.0; 6];
        let mut h = Matrix::zeros(6, 6);
        prog.objective.eval(&y, &mut g, &mut h);
        for k in 0..6 {
            let mut p = y.clone();
            let mut m = y.clone();
            p[k] += 1e-6;
            m[k] -= 1e-6;
            let fd = (prog.objective.value(&p) - prog.objective.value(&m)) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()));
        }
    }
}
