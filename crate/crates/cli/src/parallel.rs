//! Thread-pool versions of the per-agent and per-trial loops. Results are
//! identical to the sequential ones: agents report in agent order and
//! Monte Carlo trials accumulate integer counts.

use rayon::prelude::*;

use sisalloc_core::dadmm::{Agent, RoundExecutor};
use sisalloc_core::epidemic::{EpidemicParams, InitialState, MarkovSim, Trajectory};
use sisalloc_core::graph::DirectedGraph;
use sisalloc_core::Result;

#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl RoundExecutor for Rayon {
    fn run_local_steps(&self, agents: &mut [Agent], step: &(dyn Fn(&mut Agent) -> Result<()> + Sync)) -> Result<()> {
        let results: Vec<Result<()>> = agents.par_iter_mut().map(step).collect();
        results.into_iter().collect()
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
    let counts = (0..trials as u64)
        .into_par_iter()
        .fold(
            || sim.new_counts(),
            |mut acc, trial| {
                sim.run_trial(trial, &mut acc);
                acc
            },
        )
        .reduce(
            || sim.new_counts(),
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(sim.finish(&counts, trials))
}
