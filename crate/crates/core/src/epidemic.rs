//! SIS dynamics: the networked Markov process and its mean-field
//! approximation
//!
//! ```text
//! dp_i/dt = (1 - p_i) beta_i sum_j a_ij p_j - delta_i p_i
//! ```

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::DirectedGraph;
use crate::linalg::{ln, norm2, sqrt};
use crate::{Error, Result};

/// Largest clamp correction `integrate` tolerates in one step.
pub const CLAMP_LIMIT: f64 = 1e-9;

/// Fraction of the horizon skipped before fitting a decay rate.
pub const TRANSIENT_FRACTION: f64 = 0.2;

/// Minimum samples needed in the fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicParams {
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
}

impl EpidemicParams {
    pub fn new(beta: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if beta.len() != delta.len() {
            return Err(Error::DimensionMismatch {
                expected: beta.len(),
                found: delta.len(),
            });
        }
        if beta.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(Error::InvalidArgument("infection rates must be finite and >= 0".into()));
        }
        if delta.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidArgument("recovery rates must be finite and > 0".into()));
        }
        Ok(Self { beta, delta })
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    fn check_graph(&self, g: &DirectedGraph) -> Result<()> {
        if g.node_count() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: g.node_count(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Per-sample, per-node standard error of a Monte Carlo mean.
    pub std_errors: Option<Vec<Vec<f64>>>,
    /// Largest clamp correction applied while integrating.
    pub max_clamp: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }
}

pub fn mean_field_rhs(p: &[f64], g: &DirectedGraph, params: &EpidemicParams) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    mean_field_rhs_into(p, g, params, &mut out);
    out
}

fn mean_field_rhs_into(p: &[f64], g: &DirectedGraph, params: &EpidemicParams, out: &mut [f64]) {
    for i in 0..p.len() {
        let pressure: f64 = g.in_neighbors(i).map(|(j, a)| a * p[j]).sum();
        out[i] = (1.0 - p[i]) * params.beta[i] * pressure - params.delta[i] * p[i];
    }
}

fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "need dt > 0 and horizon >= 0, got dt = {dt}, horizon = {horizon}"
        )));
    }
    Ok(libm::round(horizon / dt) as usize)
}

/// Fixed-step RK4 integration of the mean-field equations, sampled every
/// step.
pub fn integrate(p0: &[f64], g: &DirectedGraph, params: &EpidemicParams, horizon: f64, dt: f64) -> Result<Trajectory> {
    params.check_graph(g)?;
    if p0.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            found: p0.len(),
        });
    }
    if p0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument("initial state must lie in [0, 1]".into()));
    }
    let steps = step_count(horizon, dt)?;
    let n = p0.len();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut p = p0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut max_clamp: f64 = 0.0;
    times.push(0.0);
    states.push(p.clone());
    for step in 1..=steps {
        mean_field_rhs_into(&p, g, params, &mut k1);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * dt * k1[i];
        }
        mean_field_rhs_into(&tmp, g, params, &mut k2);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * dt * k2[i];
        }
        mean_field_rhs_into(&tmp, g, params, &mut k3);
        for i in 0..n {
            tmp[i] = p[i] + dt * k3[i];
        }
        mean_field_rhs_into(&tmp, g, params, &mut k4);
        for i in 0..n {
            let next = p[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            let clamped = next.clamp(0.0, 1.0);
            let clamp = (next - clamped).abs();
            if clamp > CLAMP_LIMIT {
                return Err(Error::StepRejected { clamp });
            }
            max_clamp = max_clamp.max(clamp);
            p[i] = clamped;
        }
        times.push(step as f64 * dt);
        states.push(p.clone());
    }
    Ok(Trajectory {
        times,
        states,
        std_errors: None,
        max_clamp,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// The same infected set in every trial.
    Fixed(Vec<bool>),
    /// Each node infected independently with this probability.
    Bernoulli(f64),
}

/// Discrete-time Monte Carlo of the SIS jump process. A susceptible node
/// becomes infected in a step with probability `beta_i sum_j a_ij X_j dt`
/// and an infected node recovers with probability `delta_i dt`.
///
/// Trial `k` draws from ChaCha8 stream `k` of `seed`, so trials can run in
/// any order or in parallel and accumulate into the same integer counts.
#[derive(Debug, Clone)]
pub struct MarkovSim<'a> {
    graph: &'a DirectedGraph,
    params: &'a EpidemicParams,
    init: InitialState,
    dt: f64,
    steps: usize,
    seed: u64,
}

impl<'a> MarkovSim<'a> {
    pub fn new(
        graph: &'a DirectedGraph,
        params: &'a EpidemicParams,
        init: InitialState,
        horizon: f64,
        dt: f64,
        seed: u64,
    ) -> Result<Self> {
        params.check_graph(graph)?;
        let steps = step_count(horizon, dt)?;
        match &init {
            InitialState::Fixed(x) if x.len() != params.len() => {
                return Err(Error::DimensionMismatch {
                    expected: params.len(),
                    found: x.len(),
                })
            }
            InitialState::Bernoulli(p) if !(0.0..=1.0).contains(p) => {
                return Err(Error::InvalidArgument("initial infection probability must lie in [0, 1]".into()))
            }
            _ => {}
        }
        // Worst case: every in-neighbour infected.
        for i in 0..params.len() {
            let pressure: f64 = graph.in_neighbors(i).map(|(_, a)| a).sum();
            let probability = (params.beta[i] * pressure * dt).max(params.delta[i] * dt);
            if probability >= 1.0 {
                return Err(Error::ProbabilityOverflow { node: i, probability });
            }
        }
        Ok(Self {
            graph,
            params,
            init,
            dt,
            steps,
            seed,
        })
    }

    pub fn node_count(&self) -> usize {
        self.params.len()
    }

    pub fn sample_count(&self) -> usize {
        self.steps + 1
    }

    /// Zeroed count buffer, indexed `[sample * n + node]`.
    pub fn new_counts(&self) -> Vec<u32> {
        vec![0; self.sample_count() * self.node_count()]
    }

    /// Runs one trial and adds its infection indicators into `counts`.
    pub fn run_trial(&self, trial: u64, counts: &mut [u32]) {
        let n = self.node_count();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        let mut x: Vec<bool> = match &self.init {
            InitialState::Fixed(x) => x.clone(),
            InitialState::Bernoulli(p) => (0..n).map(|_| rng.random_bool(*p)).collect(),
        };
        let mut next = x.clone();
        for (slot, &xi) in counts[..n].iter_mut().zip(&x) {
            *slot += u32::from(xi);
        }
        for step in 1..=self.steps {
            for i in 0..n {
                let u: f64 = rng.random();
                next[i] = if x[i] {
                    u >= self.params.delta[i] * self.dt
                } else {
                    let pressure: f64 = self.graph.in_neighbors(i).filter(|&(j, _)| x[j]).map(|(_, a)| a).sum();
                    u < self.params.beta[i] * pressure * self.dt
                };
            }
            core::mem::swap(&mut x, &mut next);
            for (slot, &xi) in counts[step * n..(step + 1) * n].iter_mut().zip(&x) {
                *slot += u32::from(xi);
            }
        }
    }

    /// Trial-averaged infection probabilities with standard errors
    /// `sqrt(p(1-p) / (trials - 1))`.
    pub fn finish(&self, counts: &[u32], trials: usize) -> Trajectory {
        let n = self.node_count();
        let mut states = Vec::with_capacity(self.sample_count());
        let mut errors = Vec::with_capacity(self.sample_count());
        let denom = if trials > 1 { (trials - 1) as f64 } else { 1.0 };
        for row in counts.chunks(n.max(1)).take(self.sample_count()) {
            let mean: Vec<f64> = row.iter().map(|&c| c as f64 / trials.max(1) as f64).collect();
            errors.push(mean.iter().map(|p| sqrt(p * (1.0 - p) / denom)).collect());
            states.push(mean);
        }
        Trajectory {
            times: (0..self.sample_count()).map(|k| k as f64 * self.dt).collect(),
            states,
            std_errors: Some(errors),
            max_clamp: 0.0,
        }
    }
}

pub fn simulate_markov(
    g: &DirectedGraph,
    params: &EpidemicParams,
    init: InitialState,
    horizon: f64,
    dt: f64,
    trials: usize,
    seed: u64,
) -> Result<Trajectory> {
    let sim = MarkovSim::new(g, params, init, horizon, dt, seed)?;
    let mut counts = sim.new_counts();
    for trial in 0..trials {
        sim.run_trial(trial as u64, &mut counts);
    }
    Ok(sim.finish(&counts, trials))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayReport {
    /// Fitted exponential decay rate of `||p(t)||_2`; `+inf` if the norm
    /// reaches zero.
    pub achieved_rate: f64,
    pub pass: bool,
}

/// Fits `log ||p(t)||_2` by least squares over the last 80% of the horizon
/// and passes when the rate is at least `0.95 * eps_bar`.
pub fn verify_decay(traj: &Trajectory, eps_bar: f64) -> Result<DecayReport> {
    verify_decay_with_tol(traj, eps_bar, 0.05 * eps_bar)
}

pub fn verify_decay_with_tol(traj: &Trajectory, eps_bar: f64, rate_tol: f64) -> Result<DecayReport> {
    let horizon = traj.times.last().copied().unwrap_or(0.0);
    let start = TRANSIENT_FRACTION * horizon;
    let window: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= start)
        .map(|(t, p)| (*t, norm2(p)))
        .collect();
    if window.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            found: window.len(),
            needed: MIN_FIT_SAMPLES,
        });
    }
    if window.iter().any(|&(_, v)| v == 0.0) {
        return Ok(DecayReport {
            achieved_rate: f64::INFINITY,
            pass: true,
        });
    }
    let m = window.len() as f64;
    let t_mean = window.iter().map(|w| w.0).sum::<f64>() / m;
    let l_mean = window.iter().map(|w| ln(w.1)).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, v) in &window {
        sxy += (t - t_mean) * (ln(v) - l_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    let achieved_rate = -sxy / sxx;
    Ok(DecayReport {
        achieved_rate,
        pass: achieved_rate >= eps_bar - rate_tol,
    })
}

/// Comparison of a Monte Carlo mean against a mean-field trajectory on the
/// same time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dominance {
    /// `max (mc - mf - k * se)` over samples and nodes.
    pub worst_excess: f64,
    /// Whether the Monte Carlo mean never exceeds the mean field by more
    /// than `k` standard errors.
    pub holds: bool,
}

pub fn mean_field_dominates(mc: &Trajectory, mf: &Trajectory, k: f64) -> Result<Dominance> {
    let se = mc
        .std_errors
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("Monte Carlo trajectory carries no standard errors".into()))?;
    if mc.len() != mf.len() || mc.node_count() != mf.node_count() {
        return Err(Error::DimensionMismatch {
            expected: mf.len() * mf.node_count(),
            found: mc.len() * mc.node_count(),
        });
    }
    let mut worst = f64::NEG_INFINITY;
    for ((m, f), s) in mc.states.iter().zip(&mf.states).zip(se) {
        for i in 0..m.len() {
            worst = worst.max(m[i] - f[i] - k * s[i]);
        }
    }
    Ok(Dominance {
        worst_excess: worst,
        holds: worst <= 0.0,
    })
}
