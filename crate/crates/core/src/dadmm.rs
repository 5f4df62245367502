//! Distributed ADMM over simulated agents.
//!
//! Each node is an agent holding a private copy `y_u` of the global scaling
//! vector in log coordinates, its own rates, and a dual vector `phi`. A
//! synchronous round is: exchange `y_u` with communication neighbours,
//! update the duals, then solve every local subproblem
//!
//! ```text
//! minimize  f_i + g_i + phi_i^T y_u + rho sum_{j in N(i)} ||y_u - (y_u_i(k) + y_u_j(k)) / 2||^2
//! s.t.      the node's spectral log-sum-exp constraint, sum(y_u) = 0, rate boxes
//! ```
//!
//! and stops once `sum_i sum_{j in N(i)} ||y_u_i - y_u_j||` drops below `eta`.
//! [`PenaltyDomain::Linear`] applies the consensus machinery to `u = exp(y_u)`
//! instead; the local problem is then not convex in general.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::centralized::{node_cost, Allocation, AllocationProblem, GpBuild};
use crate::convex::{self, AffineRow, ConvexProgram, LogSumExp, Objective, SolveStatus, SolverOptions};
use crate::costs::CostModel;
use crate::linalg::{exp, norm2, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyDomain {
    /// Consensus on `y_u = log u`.
    Log,
    /// Consensus on `u` itself.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DadmmConfig {
    pub rho: f64,
    pub eta: f64,
    pub max_iter: usize,
    pub penalty: PenaltyDomain,
    /// Draw `y_u(0)` at random instead of starting from zero.
    pub randomize_u0: bool,
    pub seed: u64,
    /// Barrier gap of each local solve.
    pub solver_tol: f64,
    pub solver: SolverOptions,
    /// Initial barrier parameter for local solves after the first round.
    /// A solve that fails from there is retried from `solver.t0`.
    pub warm_t0: f64,
    /// Centralized optimum to report the per-round gap against.
    pub reference_cost: Option<f64>,
    /// Keep every exchanged vector in the message bus log.
    pub record_messages: bool,
}

impl Default for DadmmConfig {
    fn default() -> Self {
        Self {
            rho: 4.0,
            eta: 1e-4,
            max_iter: 2000,
            penalty: PenaltyDomain::Log,
            randomize_u0: false,
            seed: 0,
            solver_tol: 1e-9,
            solver: SolverOptions::default(),
            warm_t0: 1e4,
            reference_cost: None,
            record_messages: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: usize,
    /// Local copy of `log u`, summing to zero.
    pub y_u: Vec<f64>,
    pub y_beta: f64,
    /// `log(D~ + 1 - delta)`, the substituted recovery variable.
    pub y_delta_tilde: f64,
    pub phi: Vec<f64>,
    /// Communication neighbours (undirected support of the graph).
    pub neighbors: Vec<usize>,
}

/// An agent: its state plus the parts of its subproblem that never change.
#[derive(Debug, Clone)]
pub struct Agent {
    pub state: AgentState,
    constraint: LogSumExp,
    lower: [f64; 2],
    upper: [f64; 2],
    /// Value of the spectral constraint after the last local solve.
    pub slack: f64,
    /// Multiplier of the spectral constraint from the last local solve.
    pub multiplier: f64,
    /// Newton steps taken by the last local solve.
    pub newton_steps: usize,
}

impl Agent {
    fn dim(&self) -> usize {
        self.state.y_u.len() + 2
    }

    fn point(&self) -> Vec<f64> {
        let mut z = self.state.y_u.clone();
        z.push(self.state.y_beta);
        z.push(self.state.y_delta_tilde);
        z
    }

    /// Vector this agent shares with its neighbours.
    pub fn consensus_value(&self, penalty: PenaltyDomain) -> Vec<f64> {
        match penalty {
            PenaltyDomain::Log => self.state.y_u.clone(),
            PenaltyDomain::Linear => self.state.y_u.iter().map(|v| exp(*v)).collect(),
        }
    }

    pub fn rates(&self, build: &GpBuild) -> (f64, f64) {
        (exp(self.state.y_beta), build.delta_of(self.state.y_delta_tilde))
    }
}

/// One message of the record log.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub iter: usize,
    pub src: usize,
    pub dst: usize,
    pub values: Vec<f64>,
}

/// In-process synchronous exchange. Each round every agent publishes an
/// immutable snapshot of its consensus vector.
#[derive(Debug, Clone, Default)]
pub struct MessageBus {
    snapshots: Vec<Vec<f64>>,
    record: bool,
    log: Vec<Message>,
}

impl MessageBus {
    pub fn new(record: bool) -> Self {
        Self {
            snapshots: Vec::new(),
            record,
            log: Vec::new(),
        }
    }

    pub fn exchange(&mut self, iter: usize, agents: &[Agent], penalty: PenaltyDomain) {
        self.snapshots = agents.iter().map(|a| a.consensus_value(penalty)).collect();
        if self.record {
            for a in agents {
                for &dst in &a.state.neighbors {
                    self.log.push(Message {
                        iter,
                        src: a.state.id,
                        dst,
                        values: self.snapshots[a.state.id].clone(),
                    });
                }
            }
        }
    }

    pub fn value(&self, agent: usize) -> &[f64] {
        &self.snapshots[agent]
    }

    pub fn log(&self) -> &[Message] {
        &self.log
    }
}

/// Explicit per-edge duals: for every ordered neighbour pair `(i, j)`,
/// `alpha_ij` and `gamma_ij` each move by `rho/2` times the disagreement,
/// and `phi_i = sum_j (alpha_ij + gamma_ji)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeDuals {
    pub alpha: BTreeMap<(usize, usize), Vec<f64>>,
    pub gamma: BTreeMap<(usize, usize), Vec<f64>>,
}

impl EdgeDuals {
    pub fn new(neighbors: &[Vec<usize>], dim: usize) -> Self {
        let mut duals = Self::default();
        for (i, ns) in neighbors.iter().enumerate() {
            for &j in ns {
                duals.alpha.insert((i, j), vec![0.0; dim]);
                duals.gamma.insert((i, j), vec![0.0; dim]);
            }
        }
        duals
    }

    /// `alpha_ij += rho/2 (v_i - v_j)`, `gamma_ij += rho/2 (v_j - v_i)`.
    pub fn update(&mut self, values: &[Vec<f64>], rho: f64) {
        for (&(i, j), a) in self.alpha.iter_mut() {
            for (k, x) in a.iter_mut().enumerate() {
                *x += 0.5 * rho * (values[i][k] - values[j][k]);
            }
        }
        for (&(i, j), g) in self.gamma.iter_mut() {
            for (k, x) in g.iter_mut().enumerate() {
                *x += 0.5 * rho * (values[j][k] - values[i][k]);
            }
        }
    }

    pub fn phi(&self, i: usize, neighbors: &[usize]) -> Vec<f64> {
        let dim = self.alpha.values().next().map_or(0, Vec::len);
        let mut phi = vec![0.0; dim];
        for &j in neighbors {
            for (k, p) in phi.iter_mut().enumerate() {
                *p += self.alpha[&(i, j)][k] + self.gamma[&(j, i)][k];
            }
        }
        phi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `sum_i f_i + g_i` at the agents' own rates.
    pub total_cost: f64,
    /// `sum_i sum_{j in N(i)} ||v_i - v_j||` after the local steps.
    pub consensus_residual: f64,
    pub max_dual_norm: f64,
    /// Largest spectral-constraint value over agents (negative is slack).
    pub worst_slack: f64,
    /// `max_i ||phi_i(k+1) - phi_i(k)||` for this round's dual update.
    pub max_dual_step: f64,
    /// `total_cost - reference` when a reference is configured.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
}

impl RunTrace {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DadmmOutcome {
    pub allocation: Allocation,
    pub trace: RunTrace,
    pub converged: bool,
    pub agents: Vec<Agent>,
    pub bus: MessageBus,
}

/// Runs the local steps of one round. Implementations may run agents in
/// any order or concurrently; results are reported in agent order.
pub trait RoundExecutor {
    fn run_local_steps(&self, agents: &mut [Agent], step: &(dyn Fn(&mut Agent) -> Result<()> + Sync)) -> Result<()>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl RoundExecutor for Sequential {
    fn run_local_steps(&self, agents: &mut [Agent], step: &(dyn Fn(&mut Agent) -> Result<()> + Sync)) -> Result<()> {
        agents.iter_mut().try_for_each(step)
    }
}

/// `phi = 0`, rates at the log-domain centres of their boxes, and
/// `y_u = 0` (or seeded zero-mean noise when `randomize_u0` is set).
pub fn init(prob: &AllocationProblem, cfg: &DadmmConfig) -> Vec<Agent> {
    let build = GpBuild::for_problem(prob);
    let n = prob.node_count();
    (0..n)
        .map(|i| {
            let mut y_u = vec![0.0; n];
            if cfg.randomize_u0 {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(i as u64);
                y_u.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                let mean = y_u.iter().sum::<f64>() / n as f64;
                y_u.iter_mut().for_each(|v| *v -= mean);
            }
            let [(blo, bhi), (dlo, dhi)] = build.node_box(prob.bounds(), i);
            Agent {
                state: AgentState {
                    id: i,
                    y_u,
                    y_beta: 0.5 * (blo + bhi),
                    y_delta_tilde: 0.5 * (dlo + dhi),
                    phi: vec![0.0; n],
                    neighbors: prob.graph.undirected_neighbors(i),
                },
                constraint: build.node_constraint(&prob.graph, i, |j| j, n, n + 1),
                lower: [blo, dlo],
                upper: [bhi, dhi],
                slack: f64::NAN,
                multiplier: 0.0,
                newton_steps: 0,
            }
        })
        .collect()
}

/// `phi_i += rho sum_{j in N(i)} (v_i - v_j)` from the bus snapshots.
/// Returns the largest per-agent step norm.
pub fn dual_update(agents: &mut [Agent], bus: &MessageBus, rho: f64) -> f64 {
    let mut max_step: f64 = 0.0;
    for a in agents.iter_mut() {
        let own = bus.value(a.state.id);
        let mut step = vec![0.0; own.len()];
        for &j in &a.state.neighbors {
            for (k, s) in step.iter_mut().enumerate() {
                *s += rho * (own[k] - bus.value(j)[k]);
            }
        }
        a.state.phi.iter_mut().zip(&step).for_each(|(p, s)| *p += s);
        max_step = max_step.max(norm2(&step));
    }
    max_step
}

/// Local objective of one agent over `(y_u, y_beta, y_dt)`.
pub struct LocalObjective<'a> {
    pub cost: &'a CostModel,
    pub node: usize,
    pub shift: f64,
    pub phi: &'a [f64],
    /// `(v_i(k) + v_j(k)) / 2` for each neighbour.
    pub anchors: Vec<Vec<f64>>,
    pub rho: f64,
    pub penalty: PenaltyDomain,
}

impl LocalObjective<'_> {
    fn consensus_part(&self, y_u: &[f64], grad: Option<(&mut [f64], &mut Matrix)>) -> f64 {
        let mut value = 0.0;
        let mut grad = grad;
        for k in 0..y_u.len() {
            let (v, dv, d2v) = match self.penalty {
                PenaltyDomain::Log => (y_u[k], 1.0, 0.0),
                PenaltyDomain::Linear => {
                    let e = exp(y_u[k]);
                    (e, e, e)
                }
            };
            let mut f = self.phi[k] * v;
            let mut df = self.phi[k];
            let mut d2f = 0.0;
            for m in &self.anchors {
                let r = v - m[k];
                f += self.rho * r * r;
                df += 2.0 * self.rho * r;
                d2f += 2.0 * self.rho;
            }
            value += f;
            if let Some((g, h)) = grad.as_mut() {
                g[k] += df * dv;
                h[(k, k)] += d2f * dv * dv + df * d2v;
            }
        }
        value
    }
}

impl Objective for LocalObjective<'_> {
    fn value(&self, z: &[f64]) -> f64 {
        let n = z.len() - 2;
        node_cost(self.cost, self.shift, self.node, z[n], z[n + 1]).0 + self.consensus_part(&z[..n], None)
    }

    fn eval(&self, z: &[f64], grad: &mut [f64], hess: &mut Matrix) -> f64 {
        let n = z.len() - 2;
        let (c, g, h) = node_cost(self.cost, self.shift, self.node, z[n], z[n + 1]);
        grad[n] += g[0];
        grad[n + 1] += g[1];
        hess[(n, n)] += h[0];
        hess[(n + 1, n + 1)] += h[1];
        c + self.consensus_part(&z[..n], Some((grad, hess)))
    }
}

/// Local program of `agent` for the current round.
pub fn local_program<'a>(
    agent: &'a Agent,
    prob: &'a AllocationProblem,
    build: &GpBuild,
    bus: &MessageBus,
    rho: f64,
    penalty: PenaltyDomain,
) -> ConvexProgram<LocalObjective<'a>> {
    let own = bus.value(agent.state.id);
    let anchors = agent
        .state
        .neighbors
        .iter()
        .map(|&j| own.iter().zip(bus.value(j)).map(|(a, b)| 0.5 * (a + b)).collect())
        .collect();
    let n = agent.state.y_u.len();
    let objective = LocalObjective {
        cost: &prob.cost,
        node: agent.state.id,
        shift: build.delta_tilde_shift,
        phi: &agent.state.phi,
        anchors,
        rho,
        penalty,
    };
    let mut prog = ConvexProgram::new(agent.dim(), objective);
    prog.inequalities.push(agent.constraint.clone());
    prog.equalities.push(AffineRow::new((0..n).map(|k| (k, 1.0)).collect(), 0.0));
    prog.lower[n] = agent.lower[0];
    prog.upper[n] = agent.upper[0];
    prog.lower[n + 1] = agent.lower[1];
    prog.upper[n + 1] = agent.upper[1];
    prog
}

/// Solves the agent's subproblem warm-started from its current iterate and
/// stores the result.
pub fn local_step(
    agent: &mut Agent,
    prob: &AllocationProblem,
    build: &GpBuild,
    bus: &MessageBus,
    cfg: &DadmmConfig,
) -> Result<()> {
    let warm = agent.newton_steps > 0;
    let (report, slack) = {
        let prog = local_program(agent, prob, build, bus, cfg.rho, cfg.penalty);
        let start = agent.point();
        let cold = || convex::solve_with(&prog, &start, cfg.solver_tol, &cfg.solver);
        let mut report = if warm {
            let opts = SolverOptions {
                t0: cfg.warm_t0,
                ..cfg.solver
            };
            convex::solve_with(&prog, &start, cfg.solver_tol, &opts)
        } else {
            cold()
        };
        if warm && !matches!(&report, Ok(r) if r.status == SolveStatus::Optimal) {
            report = cold();
        }
        let report = report.and_then(|r| match r.status {
            SolveStatus::Optimal => Ok(r),
            _ => Err(Error::MaxIterations { iterations: r.iterations }),
        });
        let report = report.map_err(|e| Error::Agent {
            agent: agent.state.id,
            source: alloc::boxed::Box::new(e),
        })?;
        let slack = prog.inequalities[0].value(&report.minimizer);
        (report, slack)
    };
    let n = agent.state.y_u.len();
    agent.state.y_u.copy_from_slice(&report.minimizer[..n]);
    agent.state.y_beta = report.minimizer[n];
    agent.state.y_delta_tilde = report.minimizer[n + 1];
    agent.slack = slack;
    agent.multiplier = report.multipliers[0];
    agent.newton_steps = report.iterations;
    Ok(())
}

/// `sum_i sum_{j in N(i)} ||v_i - v_j||`.
pub fn consensus_residual(agents: &[Agent], penalty: PenaltyDomain) -> f64 {
    let values: Vec<Vec<f64>> = agents.iter().map(|a| a.consensus_value(penalty)).collect();
    let mut total = 0.0;
    for a in agents {
        for &j in &a.state.neighbors {
            let diff: Vec<f64> = values[a.state.id].iter().zip(&values[j]).map(|(x, y)| x - y).collect();
            total += norm2(&diff);
        }
    }
    total
}

fn assemble(agents: &[Agent], prob: &AllocationProblem, build: &GpBuild) -> Result<Allocation> {
    let (beta, delta) = agents.iter().map(|a| a.rates(build)).unzip();
    Allocation::assemble(prob, beta, delta)
}

fn record(iter: usize, agents: &[Agent], prob: &AllocationProblem, build: &GpBuild, cfg: &DadmmConfig, dual_step: f64) -> IterationRecord {
    let total_cost: f64 = agents
        .iter()
        .map(|a| node_cost(&prob.cost, build.delta_tilde_shift, a.state.id, a.state.y_beta, a.state.y_delta_tilde).0)
        .sum();
    IterationRecord {
        iter,
        total_cost,
        consensus_residual: consensus_residual(agents, cfg.penalty),
        max_dual_norm: agents.iter().map(|a| norm2(&a.state.phi)).fold(0.0, f64::max),
        worst_slack: agents.iter().map(|a| a.slack).fold(f64::NEG_INFINITY, f64::max),
        max_dual_step: dual_step,
        gap: cfg.reference_cost.map(|r| total_cost - r),
    }
}

pub fn run(prob: &AllocationProblem, cfg: &DadmmConfig) -> Result<DadmmOutcome> {
    run_with(prob, cfg, &Sequential)
}

/// Synchronous rounds until the consensus residual is at most `eta` or
/// `max_iter` rounds have run. Running out of rounds is not an error; the
/// outcome is flagged as not converged.
pub fn run_with(prob: &AllocationProblem, cfg: &DadmmConfig, exec: &dyn RoundExecutor) -> Result<DadmmOutcome> {
    let build = GpBuild::for_problem(prob);
    let mut agents = init(prob, cfg);
    let mut bus = MessageBus::new(cfg.record_messages);
    let mut trace = RunTrace::default();
    let mut converged = false;
    for iter in 1..=cfg.max_iter {
        bus.exchange(iter, &agents, cfg.penalty);
        let dual_step = dual_update(&mut agents, &bus, cfg.rho);
        {
            let bus = &bus;
            let build = &build;
            exec.run_local_steps(&mut agents, &|a: &mut Agent| local_step(a, prob, build, bus, cfg))?;
        }
        let rec = record(iter, &agents, prob, &build, cfg, dual_step);
        trace.records.push(rec);
        if rec.consensus_residual <= cfg.eta {
            converged = true;
            break;
        }
    }
    Ok(DadmmOutcome {
        allocation: assemble(&agents, prob, &build)?,
        trace,
        converged,
        agents,
        bus,
    })
}
