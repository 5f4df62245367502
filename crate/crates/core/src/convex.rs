//! Log-barrier interior-point solver for small smooth convex programs
//!
//! ```text
//! minimize    f(y)
//! subject to  log sum_k exp(a_k^T y + b_k) <= 0     (each inequality)
//!             C y = d
//!             lo <= y <= hi
//! ```
//!
//! Equalities (and coordinates with `lo == hi`) are eliminated through an
//! orthonormal basis of the affine feasible set, so each centering step is an
//! unconstrained damped Newton method on `t f - sum log(-c_i)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{abs, dot, exp, ln, norm_inf, AffineSubspace, Cholesky, Matrix};
use crate::{Error, Result};

/// Smooth convex objective with gradient and Hessian.
pub trait Objective {
    fn value(&self, y: &[f64]) -> f64;

    /// Adds the gradient into `grad` and the Hessian into `hess`, and returns
    /// the value.
    fn eval(&self, y: &[f64], grad: &mut [f64], hess: &mut Matrix) -> f64;
}

impl<T: Objective + ?Sized> Objective for &T {
    fn value(&self, y: &[f64]) -> f64 {
        (**self).value(y)
    }

    fn eval(&self, y: &[f64], grad: &mut [f64], hess: &mut Matrix) -> f64 {
        (**self).eval(y, grad, hess)
    }
}

/// One exponent `a^T y + b` of a log-sum-exp, with sparse `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    pub coeffs: Vec<(usize, f64)>,
    pub offset: f64,
}

impl ExpTerm {
    pub fn new(coeffs: Vec<(usize, f64)>, offset: f64) -> Self {
        Self { coeffs, offset }
    }

    fn exponent(&self, y: &[f64]) -> f64 {
        self.offset + self.coeffs.iter().map(|&(i, a)| a * y[i]).sum::<f64>()
    }
}

/// `h(y) = log sum_k exp(a_k^T y + b_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSumExp {
    pub terms: Vec<ExpTerm>,
}

/// Gradient and second-order data of a [`LogSumExp`] at a point.
#[derive(Debug, Clone)]
pub struct LseDerivs {
    pub value: f64,
    /// Softmax weight of each term.
    pub weights: Vec<f64>,
    /// Sparse gradient `sum_k w_k a_k`.
    pub gradient: Vec<(usize, f64)>,
}

impl LogSumExp {
    pub fn new(terms: Vec<ExpTerm>) -> Self {
        Self { terms }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        let z: Vec<f64> = self.terms.iter().map(|t| t.exponent(y)).collect();
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        zmax + ln(z.iter().map(|v| exp(v - zmax)).sum::<f64>())
    }

    pub fn derivs(&self, y: &[f64]) -> LseDerivs {
        let z: Vec<f64> = self.terms.iter().map(|t| t.exponent(y)).collect();
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = z.iter().map(|v| exp(v - zmax)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut gradient: Vec<(usize, f64)> = Vec::new();
        for (t, &w) in self.terms.iter().zip(&weights) {
            for &(i, a) in &t.coeffs {
                match gradient.iter_mut().find(|(j, _)| *j == i) {
                    Some(entry) => entry.1 += w * a,
                    None => gradient.push((i, w * a)),
                }
            }
        }
        LseDerivs {
            value: zmax + ln(total),
            weights,
            gradient,
        }
    }

    /// Dense gradient, mostly for tests and diagnostics.
    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; y.len()];
        for (i, v) in self.derivs(y).gradient {
            g[i] += v;
        }
        g
    }

    /// Dense Hessian `sum_k w_k a_k a_k^T - g g^T`.
    pub fn hessian(&self, y: &[f64]) -> Matrix {
        let d = self.derivs(y);
        let mut h = Matrix::zeros(y.len(), y.len());
        for (t, &w) in self.terms.iter().zip(&d.weights) {
            h.add_sparse_outer(&t.coeffs, w);
        }
        h.add_sparse_outer(&d.gradient, -1.0);
        h
    }
}

/// Affine equality `coeffs^T y = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl AffineRow {
    pub fn new(coeffs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    pub fn residual(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * y[i]).sum::<f64>() - self.rhs
    }
}

#[derive(Debug, Clone)]
pub struct ConvexProgram<O> {
    pub objective: O,
    /// Constraints `h_i(y) <= 0`.
    pub inequalities: Vec<LogSumExp>,
    pub equalities: Vec<AffineRow>,
    /// Per-coordinate bounds; infinite values are allowed.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl<O> ConvexProgram<O> {
    /// Program in `dim` variables with no constraints.
    pub fn new(dim: usize, objective: O) -> Self {
        Self {
            objective,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Largest constraint value over inequalities and box sides; negative
    /// means strictly feasible with at least that margin.
    pub fn max_violation(&self, y: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for h in &self.inequalities {
            worst = worst.max(h.value(y));
        }
        for (k, &v) in y.iter().enumerate() {
            if self.lower[k] == self.upper[k] {
                continue;
            }
            if self.lower[k].is_finite() {
                worst = worst.max(self.lower[k] - v);
            }
            if self.upper[k].is_finite() {
                worst = worst.max(v - self.upper[k]);
            }
        }
        worst
    }

    pub fn equality_residual(&self, y: &[f64]) -> f64 {
        let mut r: f64 = 0.0;
        for row in &self.equalities {
            r = r.max(abs(row.residual(y)));
        }
        for (k, &v) in y.iter().enumerate() {
            if self.lower[k] == self.upper[k] {
                r = r.max(abs(v - self.lower[k]));
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Initial barrier parameter.
    pub t0: f64,
    /// Barrier growth factor.
    pub mu: f64,
    /// Newton stops when half the squared decrement falls below this.
    pub newton_tol: f64,
    /// Armijo fraction of the backtracking line search.
    pub alpha: f64,
    /// Backtracking shrink factor.
    pub beta: f64,
    pub max_newton_per_center: usize,
    pub max_outer: usize,
    /// Slack required of the point returned by phase one.
    pub phase_one_margin: f64,
    /// Phase one searches only within this distance of the start in each
    /// reduced coordinate.
    pub phase_one_radius: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 20.0,
            newton_tol: 1e-10,
            alpha: 0.25,
            beta: 0.5,
            max_newton_per_center: 200,
            max_outer: 100,
            phase_one_margin: 1e-6,
            phase_one_radius: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub minimizer: Vec<f64>,
    pub objective_value: f64,
    /// Bound on suboptimality, `(m + lambda^2) / t` for `m` inequalities and
    /// box sides and final Newton decrement `lambda`, or the equality
    /// residual if larger.
    pub kkt_residual: f64,
    /// Total Newton steps, phase one included.
    pub iterations: usize,
    pub status: SolveStatus,
    /// Objective value after each centering step.
    pub path: Vec<f64>,
    /// Dual estimates `1 / (t * -h_i)` for the log-sum-exp inequalities.
    pub multipliers: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Side {
    Lower(usize, f64),
    Upper(usize, f64),
}

/// Equalities eliminated, box sides enumerated.
struct Prepared {
    origin: Vec<f64>,
    basis: Option<Matrix>,
    sides: Vec<Side>,
}

impl Prepared {
    fn new<O>(prog: &ConvexProgram<O>, y0: &[f64]) -> Result<Self> {
        let dim = prog.dim();
        if y0.len() != dim || prog.upper.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: y0.len(),
            });
        }
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for row in &prog.equalities {
            let mut dense = vec![0.0; dim];
            for &(i, a) in &row.coeffs {
                dense[i] += a;
            }
            rows.push((dense, row.rhs));
        }
        let mut sides = Vec::new();
        for k in 0..dim {
            let (lo, hi) = (prog.lower[k], prog.upper[k]);
            if lo > hi || lo.is_nan() || hi.is_nan() {
                return Err(Error::InvalidArgument(format!("empty box [{lo}, {hi}] at coordinate {k}")));
            }
            if lo == hi {
                let mut dense = vec![0.0; dim];
                dense[k] = 1.0;
                rows.push((dense, lo));
                continue;
            }
            if lo.is_finite() {
                sides.push(Side::Lower(k, lo));
            }
            if hi.is_finite() {
                sides.push(Side::Upper(k, hi));
            }
        }
        if rows.is_empty() {
            return Ok(Self {
                origin: vec![0.0; dim],
                basis: None,
                sides,
            });
        }
        let aff = AffineSubspace::new(dim, &rows).ok_or(Error::Infeasible {
            phase_one_value: f64::INFINITY,
        })?;
        Ok(Self {
            origin: aff.project(y0),
            basis: Some(aff.null_basis().clone()),
            sides,
        })
    }

    fn lift(&self, x: &[f64]) -> Vec<f64> {
        match &self.basis {
            Some(b) => {
                let mut y = b.mul_vec(x);
                y.iter_mut().zip(&self.origin).for_each(|(a, o)| *a += o);
                y
            }
            None => x.to_vec(),
        }
    }

    fn coords(&self, y: &[f64]) -> Vec<f64> {
        match &self.basis {
            Some(b) => {
                let diff: Vec<f64> = y.iter().zip(&self.origin).map(|(a, o)| a - o).collect();
                b.transpose_mul_vec(&diff)
            }
            None => y.to_vec(),
        }
    }

    fn reduce_vec(&self, g: Vec<f64>) -> Vec<f64> {
        match &self.basis {
            Some(b) => b.transpose_mul_vec(&g),
            None => g,
        }
    }

    fn reduce_mat(&self, h: Matrix) -> Matrix {
        match &self.basis {
            Some(b) => h.congruence(b),
            None => h,
        }
    }

    fn constraint_count<O>(&self, prog: &ConvexProgram<O>) -> usize {
        prog.inequalities.len() + self.sides.len()
    }
}

/// Accumulates `-sum log(s - c_i(y))` over all inequalities and box sides,
/// with derivatives in `y` and (for phase one) in the extra variable `s`.
struct BarrierAccum {
    grad_y: Vec<f64>,
    hess_y: Matrix,
    grad_s: f64,
    hess_ss: f64,
    hess_ys: Vec<f64>,
}

fn barrier_value<O>(prog: &ConvexProgram<O>, prep: &Prepared, y: &[f64], s: f64) -> Option<f64> {
    let mut v = 0.0;
    for h in &prog.inequalities {
        let r = s - h.value(y);
        if !(r > 0.0) {
            return None;
        }
        v -= ln(r);
    }
    for side in &prep.sides {
        let r = match *side {
            Side::Lower(k, lo) => s + y[k] - lo,
            Side::Upper(k, hi) => s + hi - y[k],
        };
        if !(r > 0.0) {
            return None;
        }
        v -= ln(r);
    }
    Some(v)
}

fn barrier_eval<O>(prog: &ConvexProgram<O>, prep: &Prepared, y: &[f64], s: f64, acc: &mut BarrierAccum) -> Option<f64> {
    let mut v = 0.0;
    for h in &prog.inequalities {
        let d = h.derivs(y);
        let r = s - d.value;
        if !(r > 0.0) {
            return None;
        }
        v -= ln(r);
        let inv = 1.0 / r;
        for &(i, g) in &d.gradient {
            acc.grad_y[i] += g * inv;
            acc.hess_ys[i] -= g * inv * inv;
        }
        acc.grad_s -= inv;
        acc.hess_ss += inv * inv;
        for (t, &w) in h.terms.iter().zip(&d.weights) {
            acc.hess_y.add_sparse_outer(&t.coeffs, w * inv);
        }
        acc.hess_y.add_sparse_outer(&d.gradient, inv * inv - inv);
    }
    for side in &prep.sides {
        // c = lo - y_k (grad -e_k) or y_k - hi (grad e_k).
        let (k, r, dc) = match *side {
            Side::Lower(k, lo) => (k, s + y[k] - lo, -1.0),
            Side::Upper(k, hi) => (k, s + hi - y[k], 1.0),
        };
        if !(r > 0.0) {
            return None;
        }
        v -= ln(r);
        let inv = 1.0 / r;
        acc.grad_y[k] += dc * inv;
        acc.grad_s -= inv;
        acc.hess_y[(k, k)] += inv * inv;
        acc.hess_ys[k] -= dc * inv * inv;
        acc.hess_ss += inv * inv;
    }
    Some(v)
}

/// Function minimized by one centering step, in reduced coordinates.
trait Centering {
    fn value(&self, t: f64, x: &[f64]) -> Option<f64>;
    fn eval(&self, t: f64, x: &[f64]) -> Option<(f64, Vec<f64>, Matrix)>;
}

struct PhaseTwo<'a, O> {
    prog: &'a ConvexProgram<O>,
    prep: &'a Prepared,
}

impl<O: Objective> Centering for PhaseTwo<'_, O> {
    fn value(&self, t: f64, x: &[f64]) -> Option<f64> {
        let y = self.prep.lift(x);
        let b = barrier_value(self.prog, self.prep, &y, 0.0)?;
        let f = self.prog.objective.value(&y);
        let v = t * f + b;
        v.is_finite().then_some(v)
    }

    fn eval(&self, t: f64, x: &[f64]) -> Option<(f64, Vec<f64>, Matrix)> {
        let y = self.prep.lift(x);
        let d = y.len();
        let mut acc = BarrierAccum {
            grad_y: vec![0.0; d],
            hess_y: Matrix::zeros(d, d),
            grad_s: 0.0,
            hess_ss: 0.0,
            hess_ys: vec![0.0; d],
        };
        let b = barrier_eval(self.prog, self.prep, &y, 0.0, &mut acc)?;
        let mut g = vec![0.0; d];
        let mut h = Matrix::zeros(d, d);
        let f = self.prog.objective.eval(&y, &mut g, &mut h);
        for (a, gb) in g.iter_mut().zip(&acc.grad_y) {
            *a = t * *a + gb;
        }
        for i in 0..d {
            for j in 0..d {
                h[(i, j)] = t * h[(i, j)] + acc.hess_y[(i, j)];
            }
        }
        let v = t * f + b;
        if !v.is_finite() {
            return None;
        }
        Some((v, self.prep.reduce_vec(g), self.prep.reduce_mat(h)))
    }
}

/// Phase one: minimize `s` subject to `c_i(y) <= s`, with `s >= -1` kept as
/// an extra barrier term so the problem stays bounded.
/// Keeps every reduced coordinate within `radius` of `anchor`, so the search
/// stays bounded when the inequalities are unbounded below along some line.
struct PhaseOne<'a, O> {
    prog: &'a ConvexProgram<O>,
    prep: &'a Prepared,
    anchor: Vec<f64>,
    radius: f64,
}

impl<O> PhaseOne<'_, O> {
    fn trust_value(&self, x: &[f64]) -> Option<f64> {
        let mut v = 0.0;
        for (a, c) in x.iter().zip(&self.anchor) {
            let (lo, hi) = (self.radius + a - c, self.radius - a + c);
            if !(lo > 0.0 && hi > 0.0) {
                return None;
            }
            v -= ln(lo) + ln(hi);
        }
        Some(v)
    }
}

impl<O> Centering for PhaseOne<'_, O> {
    fn value(&self, t: f64, xs: &[f64]) -> Option<f64> {
        let (x, s) = xs.split_at(xs.len() - 1);
        let s = s[0];
        if !(s > -1.0) {
            return None;
        }
        let y = self.prep.lift(x);
        let b = barrier_value(self.prog, self.prep, &y, s)?;
        Some(t * s + b + self.trust_value(x)? - ln(s + 1.0))
    }

    fn eval(&self, t: f64, xs: &[f64]) -> Option<(f64, Vec<f64>, Matrix)> {
        let r = xs.len() - 1;
        let (x, s) = xs.split_at(r);
        let s = s[0];
        if !(s > -1.0) {
            return None;
        }
        let y = self.prep.lift(x);
        let d = y.len();
        let mut acc = BarrierAccum {
            grad_y: vec![0.0; d],
            hess_y: Matrix::zeros(d, d),
            grad_s: 0.0,
            hess_ss: 0.0,
            hess_ys: vec![0.0; d],
        };
        let b = barrier_eval(self.prog, self.prep, &y, s, &mut acc)? + self.trust_value(x)?;
        let floor = 1.0 / (s + 1.0);
        let gx = self.prep.reduce_vec(acc.grad_y);
        let hxx = self.prep.reduce_mat(acc.hess_y);
        let hxs = self.prep.reduce_vec(acc.hess_ys);
        let mut grad = gx;
        grad.push(t + acc.grad_s - floor);
        let mut hess = Matrix::zeros(r + 1, r + 1);
        for i in 0..r {
            for j in 0..r {
                hess[(i, j)] = hxx[(i, j)];
            }
            hess[(i, r)] = hxs[i];
            hess[(r, i)] = hxs[i];
        }
        for (i, (a, c)) in x.iter().zip(&self.anchor).enumerate() {
            let (lo, hi) = (1.0 / (self.radius + a - c), 1.0 / (self.radius - a + c));
            grad[i] += hi - lo;
            hess[(i, i)] += lo * lo + hi * hi;
        }
        hess[(r, r)] = acc.hess_ss + floor * floor;
        Some((t * s + b - ln(s + 1.0), grad, hess))
    }
}

struct CenterOutcome {
    steps: usize,
    converged: bool,
    /// Squared Newton decrement at the returned point.
    decrement_sq: f64,
}

/// Damped Newton until half the squared decrement is below `dec_tol`, or
/// no step can make progress at rounding level. A stalled iterate still
/// counts as centered when half the decrement is below `stall_tol`.
fn center<C: Centering>(
    c: &C,
    t: f64,
    x: &mut Vec<f64>,
    dec_tol: f64,
    stall_tol: f64,
    opts: &SolverOptions,
) -> Result<CenterOutcome> {
    let mut steps = 0;
    loop {
        let (v0, g, h) = c.eval(t, x).ok_or_else(|| Error::InvalidArgument("iterate left the barrier domain".into()))?;
        let grad_norm = norm_inf(&g);
        let (chol, _) = Cholesky::factor_regularized(&h)?;
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let dx = chol.solve(&neg);
        let slope = dot(&g, &dx);
        let decrement_sq = -slope;
        let half = decrement_sq / 2.0;
        if !decrement_sq.is_finite() || half <= dec_tol {
            return Ok(CenterOutcome {
                steps,
                converged: decrement_sq.is_finite(),
                decrement_sq,
            });
        }
        if steps >= opts.max_newton_per_center {
            return Ok(CenterOutcome {
                steps,
                converged: false,
                decrement_sq,
            });
        }
        // Below this level rounding in `v0` hides the predicted decrease, so
        // steps are judged by the gradient norm instead.
        let noise = 1e3 * f64::EPSILON * (abs(v0) + 1.0);
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-18 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + step * b).collect();
            if trial == *x {
                break;
            }
            let ok = if half > noise {
                c.value(t, &trial).is_some_and(|v| v <= v0 + opts.alpha * step * slope)
            } else {
                c.eval(t, &trial).is_some_and(|(_, g1, _)| norm_inf(&g1) < grad_norm)
            };
            if ok {
                accepted = Some(trial);
                break;
            }
            step *= opts.beta;
        }
        steps += 1;
        match accepted {
            Some(next) => *x = next,
            None => {
                return Ok(CenterOutcome {
                    steps,
                    converged: half <= noise.max(dec_tol).max(stall_tol),
                    decrement_sq,
                })
            }
        }
    }
}

/// Finds a point satisfying every inequality and box side with slack at
/// least `opts.phase_one_margin`, and every equality.
pub fn phase_one<O>(prog: &ConvexProgram<O>, y_guess: &[f64]) -> Result<Vec<f64>> {
    let prep = Prepared::new(prog, y_guess)?;
    phase_one_prepared(prog, &prep, y_guess, &SolverOptions::default()).map(|(y, _)| y)
}

fn phase_one_prepared<O>(
    prog: &ConvexProgram<O>,
    prep: &Prepared,
    y_guess: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, usize)> {
    let x0 = prep.coords(&clamp_into_box(prog, y_guess));
    let y0 = prep.lift(&x0);
    let worst = prog.max_violation(&y0);
    if worst < -opts.phase_one_margin || prep.constraint_count(prog) == 0 {
        return Ok((y0, 0));
    }
    let one = PhaseOne {
        prog,
        prep,
        anchor: x0.clone(),
        radius: opts.phase_one_radius,
    };
    let mut xs = x0;
    xs.push(worst + 1.0);
    let m = (prep.constraint_count(prog) + 1 + 2 * one.anchor.len()) as f64;
    let mut t = opts.t0;
    let mut steps = 0;
    for _ in 0..opts.max_outer {
        let out = center(&one, t, &mut xs, opts.newton_tol, opts.newton_tol, opts)?;
        steps += out.steps;
        let s = xs[xs.len() - 1];
        let gap = m / t;
        if s <= -opts.phase_one_margin && (s <= -0.1 || gap <= 0.5 * abs(s)) {
            let y = prep.lift(&xs[..xs.len() - 1]);
            return Ok((y, steps));
        }
        if s - gap > 0.0 || gap < 1e-12 {
            return Err(Error::Infeasible { phase_one_value: s });
        }
        t *= opts.mu;
    }
    Err(Error::Infeasible {
        phase_one_value: xs[xs.len() - 1],
    })
}

/// Pulls finite box sides slightly inwards; leaves other coordinates alone.
fn clamp_into_box<O>(prog: &ConvexProgram<O>, y: &[f64]) -> Vec<f64> {
    y.iter()
        .enumerate()
        .map(|(k, &v)| {
            let (lo, hi) = (prog.lower[k], prog.upper[k]);
            if lo == hi {
                return lo;
            }
            let pad = if lo.is_finite() && hi.is_finite() {
                1e-3 * (hi - lo)
            } else {
                1e-3
            };
            let mut v = v;
            if lo.is_finite() && v < lo + pad {
                v = lo + pad;
            }
            if hi.is_finite() && v > hi - pad {
                v = hi - pad;
            }
            v
        })
        .collect()
}

/// Solves with default options. `y0` need not be feasible: phase one runs
/// first when it is not strictly so.
pub fn solve<O: Objective>(prog: &ConvexProgram<O>, y0: &[f64], tol: f64) -> Result<SolveReport> {
    solve_with(prog, y0, tol, &SolverOptions::default())
}

pub fn solve_with<O: Objective>(prog: &ConvexProgram<O>, y0: &[f64], tol: f64, opts: &SolverOptions) -> Result<SolveReport> {
    let prep = Prepared::new(prog, y0)?;
    let two = PhaseTwo { prog, prep: &prep };
    let x0 = prep.coords(y0);
    let (mut x, mut iterations) = if two.value(opts.t0, &x0).is_some() {
        (x0, 0)
    } else {
        let (y, steps) = phase_one_prepared(prog, &prep, y0, opts)?;
        (prep.coords(&y), steps)
    };
    if two.value(opts.t0, &x).is_none() {
        return Err(Error::Infeasible {
            phase_one_value: prog.max_violation(&prep.lift(&x)),
        });
    }
    let m = prep.constraint_count(prog);
    let mut t = opts.t0;
    let mut path = Vec::new();
    let mut status = SolveStatus::MaxIter;
    let mut decrement_sq = f64::INFINITY;
    for _ in 0..opts.max_outer {
        let needed = 0.1 * t * tol;
        let out = center(&two, t, &mut x, opts.newton_tol.min(needed), needed, opts)?;
        iterations += out.steps;
        decrement_sq = out.decrement_sq;
        path.push(prog.objective.value(&prep.lift(&x)));
        if !out.converged {
            break;
        }
        if m == 0 || (m as f64) / t < tol {
            status = SolveStatus::Optimal;
            break;
        }
        t *= opts.mu;
    }
    let y = prep.lift(&x);
    let kkt_residual = ((m as f64 + decrement_sq) / t).max(prog.equality_residual(&y));
    if status == SolveStatus::Optimal && kkt_residual > tol {
        status = SolveStatus::MaxIter;
    }
    let multipliers = prog.inequalities.iter().map(|h| 1.0 / (t * -h.value(&y))).collect();
    Ok(SolveReport {
        objective_value: prog.objective.value(&y),
        minimizer: y,
        kkt_residual,
        iterations,
        status,
        path,
        multipliers,
    })
}

/// KKT residual of `(y, lambda)` for the program: the worst of primal
/// infeasibility, complementary slackness `|lambda_i h_i|`, and the
/// stationarity error of the Lagrangian after removing components that
/// active bounds or equality rows can absorb.
pub fn kkt_residual<O: Objective>(prog: &ConvexProgram<O>, y: &[f64], multipliers: &[f64], active_tol: f64) -> f64 {
    let d = prog.dim();
    let mut grad = vec![0.0; d];
    let mut scratch = Matrix::zeros(d, d);
    prog.objective.eval(y, &mut grad, &mut scratch);
    let mut worst: f64 = prog.equality_residual(y);
    for (h, &lam) in prog.inequalities.iter().zip(multipliers) {
        let d = h.derivs(y);
        worst = worst.max(d.value.max(0.0)).max(abs(lam * d.value));
        for (i, g) in d.gradient {
            grad[i] += lam * g;
        }
    }
    let mut rows: Vec<(Vec<f64>, f64)> = prog
        .equalities
        .iter()
        .map(|row| {
            let mut dense = vec![0.0; d];
            for &(i, a) in &row.coeffs {
                dense[i] += a;
            }
            (dense, row.rhs)
        })
        .collect();
    for k in 0..d {
        let (lo, hi) = (prog.lower[k], prog.upper[k]);
        worst = worst.max((lo - y[k]).max(0.0)).max((y[k] - hi).max(0.0));
        let at_lo = lo.is_finite() && y[k] - lo <= active_tol;
        let at_hi = hi.is_finite() && hi - y[k] <= active_tol;
        if lo == hi {
            let mut dense = vec![0.0; d];
            dense[k] = 1.0;
            rows.push((dense, lo));
        } else if at_lo && grad[k] > 0.0 || at_hi && grad[k] < 0.0 {
            grad[k] = 0.0;
        }
    }
    if !rows.is_empty() {
        if let Some(aff) = AffineSubspace::new(d, &rows) {
            grad = aff.project_onto_kernel(&grad);
        }
    }
    worst.max(norm_inf(&grad))
}
