//! Subcommand implementations. Each returns an [`Outcome`] whose status
//! maps to the process exit code; hard errors come back as `Err`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};

use sisalloc_core::centralized::{feasibility_report, solve_centralized, AllocationProblem, CentralSolution};
use sisalloc_core::dadmm::{self, DadmmOutcome, RoundExecutor, Sequential};
use sisalloc_core::epidemic::{self, EpidemicParams, InitialState};
use sisalloc_core::spectral::{spectral_abscissa, spectral_radius_nonneg};
use sisalloc_core::Error;

use crate::config::ExperimentConfig;
use crate::io;
use crate::parallel::{self, Rayon};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Infeasible instance, failed verification or non-converged run.
    Failed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Failed => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub report: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Central,
    Dadmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Reference {
    Central,
}

pub fn gen(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Outcome> {
    let g = cfg.build_graph()?;
    let path = out.join("graph.txt");
    io::write_graph(&path, &g, &cfg.hash())?;
    let radius = spectral_radius_nonneg(g.adjacency(), 1e-12)?;
    let report = format!(
        "n = {}\nedges = {}\nrho(A) = {}\nstrongly connected = {}\nwrote {}\n",
        g.node_count(),
        g.edge_count(),
        radius,
        g.is_strongly_connected(),
        path.display()
    );
    Ok(Outcome {
        status: Status::Success,
        report,
    })
}

fn problem(cfg: &ExperimentConfig) -> anyhow::Result<AllocationProblem> {
    cfg.build_problem(cfg.build_graph()?)
}

/// Centralized solve; `Ok(Err(outcome))` carries the infeasibility report.
fn central(cfg: &ExperimentConfig, prob: &AllocationProblem) -> anyhow::Result<Result<CentralSolution, Outcome>> {
    match solve_centralized(prob, cfg.problem.tol) {
        Ok(sol) => Ok(Ok(sol)),
        Err(Error::Infeasible { .. }) => {
            let corners = feasibility_report(prob)?;
            Ok(Err(Outcome {
                status: Status::Failed,
                report: format!("infeasible at eps_bar = {}\n{}", prob.eps_bar, io::format_corners(&corners)),
            }))
        }
        Err(e) => Err(e.into()),
    }
}

fn run_dadmm(cfg: &ExperimentConfig, prob: &AllocationProblem, reference: Option<f64>) -> anyhow::Result<DadmmOutcome> {
    let exec: &dyn RoundExecutor = if cfg.dadmm.parallel { &Rayon } else { &Sequential };
    Ok(dadmm::run_with(prob, &cfg.dadmm.to_core(reference), exec)?)
}

fn write_dadmm(cfg: &ExperimentConfig, prob: &AllocationProblem, run: &DadmmOutcome, out: &Path, name: &str) -> anyhow::Result<()> {
    let hash = cfg.hash();
    io::write_allocation(&out.join(name), &run.allocation, prob, &hash)?;
    io::write_trace(&out.join("trace.csv"), &run.trace, &hash)?;
    if cfg.dadmm.record_messages {
        io::write_messages(&out.join("messages.csv"), run.bus.log(), &hash)?;
    }
    Ok(())
}

fn dadmm_summary(run: &DadmmOutcome) -> String {
    let last = run.trace.last();
    format!(
        "dadmm: converged = {}, rounds = {}, total_cost = {}, abscissa = {}, consensus_residual = {}, max_dual_step = {}\n",
        run.converged,
        run.trace.len(),
        run.allocation.total_cost,
        run.allocation.abscissa,
        last.map_or(f64::NAN, |r| r.consensus_residual),
        last.map_or(f64::NAN, |r| r.max_dual_step),
    )
}

pub fn solve(cfg: &ExperimentConfig, mode: Mode, reference: Option<Reference>, out: &Path) -> anyhow::Result<Outcome> {
    let prob = problem(cfg)?;
    let hash = cfg.hash();
    let mut report = String::new();
    match mode {
        Mode::Central => {
            let sol = match central(cfg, &prob)? {
                Ok(sol) => sol,
                Err(outcome) => return Ok(outcome),
            };
            io::write_allocation(&out.join("allocation.csv"), &sol.allocation, &prob, &hash)?;
            writeln!(
                report,
                "central: total_cost = {}, abscissa = {}, eps_bar = {}, newton_steps = {}",
                sol.allocation.total_cost, sol.allocation.abscissa, prob.eps_bar, sol.report.iterations
            )?;
            Ok(Outcome {
                status: Status::Success,
                report,
            })
        }
        Mode::Dadmm => {
            let reference_cost = match reference {
                Some(Reference::Central) => match central(cfg, &prob)? {
                    Ok(sol) => {
                        writeln!(report, "reference central total_cost = {}", sol.allocation.total_cost)?;
                        Some(sol.allocation.total_cost)
                    }
                    Err(outcome) => return Ok(outcome),
                },
                None => {
                    if let Err(outcome) = feasibility_precheck(&prob)? {
                        return Ok(outcome);
                    }
                    None
                }
            };
            let run = run_dadmm(cfg, &prob, reference_cost)?;
            write_dadmm(cfg, &prob, &run, out, "allocation.csv")?;
            report.push_str(&dadmm_summary(&run));
            if let (Some(r), Some(last)) = (reference_cost, run.trace.last()) {
                writeln!(report, "relative gap = {}", (last.total_cost - r) / r)?;
            }
            Ok(Outcome {
                status: if run.converged { Status::Success } else { Status::Failed },
                report,
            })
        }
    }
}

/// The most stabilizing corner decides feasibility.
fn feasibility_precheck(prob: &AllocationProblem) -> anyhow::Result<Result<(), Outcome>> {
    let corners = feasibility_report(prob)?;
    if corners.corners[2].violates(prob.eps_bar) {
        return Ok(Err(Outcome {
            status: Status::Failed,
            report: format!("infeasible at eps_bar = {}\n{}", prob.eps_bar, io::format_corners(&corners)),
        }));
    }
    Ok(Ok(()))
}

pub fn verify(cfg: &ExperimentConfig, allocation: &Path, out: &Path) -> anyhow::Result<Outcome> {
    let g = cfg.build_graph()?;
    let (beta, delta) = io::read_allocation(allocation).with_context(|| format!("reading {}", allocation.display()))?;
    if beta.len() != g.node_count() {
        bail!(
            "allocation has {} nodes but the graph has {}",
            beta.len(),
            g.node_count()
        );
    }
    let hash = cfg.hash();
    let sim = &cfg.simulation;
    let eps_bar = cfg.problem.eps_bar;
    let params = EpidemicParams::new(beta, delta)?;
    let abscissa = spectral_abscissa(&g, &params.beta, &params.delta)?;
    let p0 = vec![sim.p0; g.node_count()];
    let mf = epidemic::integrate(&p0, &g, &params, sim.horizon, sim.dt)?;
    io::write_trajectory(&out.join("trajectory.csv"), &mf, &hash)?;
    let decay = epidemic::verify_decay(&mf, eps_bar)?;
    let mut report = String::new();
    writeln!(
        report,
        "abscissa = {abscissa}\nachieved_rate = {} (need >= {})\ndecay: {}",
        decay.achieved_rate,
        0.95 * eps_bar,
        if decay.pass { "pass" } else { "fail" }
    )?;
    let mut pass = decay.pass;
    if sim.mc_trials > 0 {
        let mc = parallel::simulate_markov(
            &g,
            &params,
            InitialState::Bernoulli(sim.p0),
            sim.horizon,
            sim.dt,
            sim.mc_trials,
            sim.mc_seed,
        )?;
        io::write_trajectory(&out.join("mc_trajectory.csv"), &mc, &hash)?;
        let dom = epidemic::mean_field_dominates(&mc, &mf, 3.0)?;
        writeln!(
            report,
            "monte carlo ({} trials): worst excess over mean field + 3 se = {}\nmonte carlo: {}",
            sim.mc_trials,
            dom.worst_excess,
            if dom.holds { "pass" } else { "fail" }
        )?;
        pass &= dom.holds;
    }
    Ok(Outcome {
        status: if pass { Status::Success } else { Status::Failed },
        report,
    })
}

pub fn corners(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Outcome> {
    let prob = problem(cfg)?;
    let report = feasibility_report(&prob)?;
    io::write_corners(&out.join("corners.csv"), &report, &cfg.hash())?;
    let b = prob.bounds().node(0);
    Ok(Outcome {
        status: Status::Success,
        report: format!(
            "beta in [{}, {}], delta in [{}, {}]\n{}",
            b.beta.lo,
            b.beta.hi,
            b.delta.lo,
            b.delta.hi,
            io::format_corners(&report)
        ),
    })
}

pub fn compare(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Outcome> {
    let prob = problem(cfg)?;
    let hash = cfg.hash();
    let sol = match central(cfg, &prob)? {
        Ok(sol) => sol,
        Err(outcome) => return Ok(outcome),
    };
    io::write_allocation(&out.join("allocation_central.csv"), &sol.allocation, &prob, &hash)?;
    let reference = sol.allocation.total_cost;
    let run = run_dadmm(cfg, &prob, Some(reference))?;
    write_dadmm(cfg, &prob, &run, out, "allocation_dadmm.csv")?;
    let mut report = format!(
        "central: total_cost = {}, abscissa = {}\n",
        reference, sol.allocation.abscissa
    );
    report.push_str(&dadmm_summary(&run));
    writeln!(
        report,
        "relative gap = {}",
        (run.allocation.total_cost - reference) / reference
    )?;
    Ok(Outcome {
        status: Status::Success,
        report,
    })
}
