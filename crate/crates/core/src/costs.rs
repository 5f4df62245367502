//! Vaccine and antidote cost models.
//!
//! Vaccines lower a node's infection rate `beta`, antidotes raise its
//! recovery rate `delta`. Both built-in families are convex in the natural
//! rates and stay convex after the logarithmic change of variables used by
//! the geometric program.
//!
//! * [`CostKind::NormalizedQuasiconvex`]:
//!   `f(b) = (1/b - 1/b_hi) / (1/b_lo - 1/b_hi)` and
//!   `g(d) = (1/(1-d) - 1/(1-d_lo)) / (1/(1-d_hi) - 1/(1-d_lo))`,
//!   so `f` runs from 1 at `b_lo` to 0 at `b_hi` and `g` from 0 at `d_lo` to
//!   1 at `d_hi`.
//! * [`CostKind::ReciprocalMonomial`]: `f(b) = 1/b`, `g(d) = 1/(1-d)`.
//!
//! A degenerate interval (`lo == hi`) has nothing to normalize against; the
//! normalized cost is defined as zero there.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::exp;
use crate::{Error, Result};

/// Relative slack accepted by the domain checks, so that values recovered
/// through `exp(ln(x))` at a bound are not rejected.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = DOMAIN_SLACK * self.hi.abs().max(1.0);
        x >= self.lo - slack && x <= self.hi + slack
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn geometric_mid(&self) -> f64 {
        libm::sqrt(self.lo * self.hi)
    }
}

/// Feasible rate box of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeBounds {
    pub beta: Interval,
    pub delta: Interval,
}

impl NodeBounds {
    /// Checks `0 < beta_lo <= beta_hi` and `0 < delta_lo <= delta_hi < 1`.
    pub fn new(beta_lo: f64, beta_hi: f64, delta_lo: f64, delta_hi: f64) -> Result<Self> {
        let ok = beta_lo > 0.0
            && beta_lo <= beta_hi
            && beta_hi.is_finite()
            && delta_lo > 0.0
            && delta_lo <= delta_hi
            && delta_hi < 1.0;
        if !ok {
            return Err(Error::InvalidArgument(alloc::format!(
                "bounds must satisfy 0 < beta_lo <= beta_hi and 0 < delta_lo <= delta_hi < 1, \
                 got beta [{beta_lo}, {beta_hi}], delta [{delta_lo}, {delta_hi}]"
            )));
        }
        Ok(Self {
            beta: Interval::new(beta_lo, beta_hi),
            delta: Interval::new(delta_lo, delta_hi),
        })
    }
}

/// Per-node rate boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBounds {
    nodes: Vec<NodeBounds>,
}

impl RateBounds {
    pub fn shared(n: usize, bounds: NodeBounds) -> Self {
        Self {
            nodes: vec![bounds; n],
        }
    }

    pub fn per_node(nodes: Vec<NodeBounds>) -> Self {
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &NodeBounds {
        &self.nodes[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &NodeBounds> {
        self.nodes.iter()
    }

    pub fn max_delta_hi(&self) -> f64 {
        self.nodes.iter().map(|b| b.delta.hi).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    NormalizedQuasiconvex,
    ReciprocalMonomial,
}

/// A value with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivs {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

/// Cost of one node in log coordinates with derivatives; the Hessian is
/// diagonal because the cost separates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogCost {
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian_diag: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub kind: CostKind,
    pub bounds: RateBounds,
}

impl CostModel {
    pub fn new(kind: CostKind, bounds: RateBounds) -> Self {
        Self { kind, bounds }
    }

    pub fn node_count(&self) -> usize {
        self.bounds.len()
    }

    pub fn vaccine_cost(&self, node: usize, beta: f64) -> Result<f64> {
        let b = self.bounds.node(node).beta;
        if !b.contains(beta) {
            return Err(Error::Domain {
                what: "beta",
                value: beta,
                lo: b.lo,
                hi: b.hi,
            });
        }
        Ok(self.vaccine_derivs(node, beta).value)
    }

    pub fn antidote_cost(&self, node: usize, delta: f64) -> Result<f64> {
        let d = self.bounds.node(node).delta;
        if !d.contains(delta) {
            return Err(Error::Domain {
                what: "delta",
                value: delta,
                lo: d.lo,
                hi: d.hi,
            });
        }
        Ok(self.antidote_derivs(node, delta).value)
    }

    /// `f` and its derivatives in `beta`, without a bounds check.
    pub fn vaccine_derivs(&self, node: usize, beta: f64) -> Derivs {
        let inv = 1.0 / beta;
        let (offset, scale) = match self.kind {
            CostKind::ReciprocalMonomial => (0.0, 1.0),
            CostKind::NormalizedQuasiconvex => {
                let b = self.bounds.node(node).beta;
                if b.is_degenerate() {
                    (0.0, 0.0)
                } else {
                    (1.0 / b.hi, 1.0 / (1.0 / b.lo - 1.0 / b.hi))
                }
            }
        };
        Derivs {
            value: scale * (inv - offset),
            first: -scale * inv * inv,
            second: 2.0 * scale * inv * inv * inv,
        }
    }

    /// `g` and its derivatives in `delta`, without a bounds check.
    pub fn antidote_derivs(&self, node: usize, delta: f64) -> Derivs {
        let inv = 1.0 / (1.0 - delta);
        let (offset, scale) = match self.kind {
            CostKind::ReciprocalMonomial => (0.0, 1.0),
            CostKind::NormalizedQuasiconvex => {
                let d = self.bounds.node(node).delta;
                if d.is_degenerate() {
                    (0.0, 0.0)
                } else {
                    let lo = 1.0 / (1.0 - d.lo);
                    (lo, 1.0 / (1.0 / (1.0 - d.hi) - lo))
                }
            }
        };
        Derivs {
            value: scale * (inv - offset),
            first: scale * inv * inv,
            second: 2.0 * scale * inv * inv * inv,
        }
    }

    /// `f(e^y_beta) + g(e^y_delta)` with gradient and diagonal Hessian in
    /// `(y_beta, y_delta)`.
    pub fn log_domain_cost(&self, node: usize, y_beta: f64, y_delta: f64) -> Result<LogCost> {
        let beta = exp(y_beta);
        let delta = exp(y_delta);
        self.vaccine_cost(node, beta)?;
        self.antidote_cost(node, delta)?;
        let f = log_chain(self.vaccine_derivs(node, beta), beta);
        let g = log_chain(self.antidote_derivs(node, delta), delta);
        Ok(LogCost {
            value: f.value + g.value,
            gradient: [f.first, g.first],
            hessian_diag: [f.second, g.second],
        })
    }

    /// Total cost of an allocation.
    pub fn total(&self, beta: &[f64], delta: &[f64]) -> Result<f64> {
        let mut sum = 0.0;
        for i in 0..self.node_count() {
            sum += self.vaccine_cost(i, beta[i])? + self.antidote_cost(i, delta[i])?;
        }
        Ok(sum)
    }
}

/// Derivatives of `h(e^y)` in `y` from those of `h` at `x = e^y`.
pub fn log_chain(d: Derivs, x: f64) -> Derivs {
    Derivs {
        value: d.value,
        first: d.first * x,
        second: d.second * x * x + d.first * x,
    }
}
