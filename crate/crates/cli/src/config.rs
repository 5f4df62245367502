//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sisalloc_core::centralized::AllocationProblem;
use sisalloc_core::costs::{CostKind, CostModel, NodeBounds, RateBounds};
use sisalloc_core::dadmm::{DadmmConfig, PenaltyDomain};
use sisalloc_core::graph::{random_strongly_connected, DirectedGraph, WeightRange};
use sisalloc_core::spectral::spectral_radius_nonneg;

use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    #[serde(default)]
    pub bounds: BoundsRecipe,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub dadmm: DadmmSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory relative paths are resolved against; not part of the
    /// serialized config or its hash.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    Random {
        n: usize,
        p: f64,
        seed: u64,
        #[serde(default = "one")]
        weight_lo: f64,
        #[serde(default = "one")]
        weight_hi: f64,
    },
    /// Edge-list file; relative paths are resolved against the config file.
    File { path: PathBuf },
}

/// Rate bounds shared by every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundsRecipe {
    Explicit {
        beta_lo: f64,
        beta_hi: f64,
        delta_lo: f64,
        delta_hi: f64,
    },
    /// `tau_c = tau_numerator / rho(A)`, `beta_hi = beta_hi_multiplier * tau_c`,
    /// `beta_lo = beta_lo_ratio * beta_hi`. The numerator defaults to
    /// `1 - delta_hi`.
    Threshold {
        delta_lo: f64,
        delta_hi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau_numerator: Option<f64>,
        beta_hi_multiplier: f64,
        beta_lo_ratio: f64,
    },
}

impl Default for BoundsRecipe {
    fn default() -> Self {
        Self::Threshold {
            delta_lo: 0.025,
            delta_hi: 0.75,
            tau_numerator: None,
            beta_hi_multiplier: 4.0,
            beta_lo_ratio: 0.26,
        }
    }
}

impl BoundsRecipe {
    pub fn resolve(&self, graph: &DirectedGraph) -> anyhow::Result<NodeBounds> {
        let b = match *self {
            Self::Explicit {
                beta_lo,
                beta_hi,
                delta_lo,
                delta_hi,
            } => NodeBounds::new(beta_lo, beta_hi, delta_lo, delta_hi)?,
            Self::Threshold {
                delta_lo,
                delta_hi,
                tau_numerator,
                beta_hi_multiplier,
                beta_lo_ratio,
            } => {
                let radius = spectral_radius_nonneg(graph.adjacency(), 1e-12)?;
                if radius <= 0.0 {
                    bail!("threshold recipe needs rho(A) > 0");
                }
                let tau_c = tau_numerator.unwrap_or(1.0 - delta_hi) / radius;
                let beta_hi = beta_hi_multiplier * tau_c;
                NodeBounds::new(beta_lo_ratio * beta_hi, beta_hi, delta_lo, delta_hi)?
            }
        };
        Ok(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostName {
    Normalized,
    Reciprocal,
}

impl From<CostName> for CostKind {
    fn from(c: CostName) -> Self {
        match c {
            CostName::Normalized => CostKind::NormalizedQuasiconvex,
            CostName::Reciprocal => CostKind::ReciprocalMonomial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub eps_bar: f64,
    pub cost: CostName,
    /// Barrier gap of the centralized solve.
    pub tol: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            eps_bar: 0.2,
            cost: CostName::Normalized,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyName {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DadmmSection {
    pub rho: f64,
    pub eta: f64,
    pub max_iter: usize,
    pub penalty: PenaltyName,
    pub randomize_u0: bool,
    pub seed: u64,
    pub solver_tol: f64,
    /// Run agents' local solves on a thread pool.
    pub parallel: bool,
    /// Also write every exchanged vector to `messages.csv`.
    pub record_messages: bool,
}

impl Default for DadmmSection {
    fn default() -> Self {
        let d = DadmmConfig::default();
        Self {
            rho: d.rho,
            eta: d.eta,
            max_iter: d.max_iter,
            penalty: PenaltyName::Log,
            randomize_u0: d.randomize_u0,
            seed: d.seed,
            solver_tol: d.solver_tol,
            parallel: true,
            record_messages: false,
        }
    }
}

impl DadmmSection {
    pub fn to_core(&self, reference_cost: Option<f64>) -> DadmmConfig {
        DadmmConfig {
            rho: self.rho,
            eta: self.eta,
            max_iter: self.max_iter,
            penalty: match self.penalty {
                PenaltyName::Log => PenaltyDomain::Log,
                PenaltyName::Linear => PenaltyDomain::Linear,
            },
            randomize_u0: self.randomize_u0,
            seed: self.seed,
            solver_tol: self.solver_tol,
            reference_cost,
            record_messages: self.record_messages,
            ..DadmmConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub horizon: f64,
    pub dt: f64,
    /// Initial infection probability of every node.
    pub p0: f64,
    /// Monte Carlo trials in `verify`; zero skips the cross-check.
    pub mc_trials: usize,
    pub mc_seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            horizon: 50.0,
            dt: 0.01,
            p0: 0.1,
            mc_trials: 200,
            mc_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

fn one() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        if let GraphSource::File { path: p } = &cfg.graph {
            let p = cfg.resolve(p);
            if !p.exists() {
                bail!("graph file {} does not exist", p.display());
            }
        }
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_relative() {
            self.base_dir.join(p)
        } else {
            p.to_path_buf()
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn build_graph(&self) -> anyhow::Result<DirectedGraph> {
        match &self.graph {
            GraphSource::Random {
                n,
                p,
                seed,
                weight_lo,
                weight_hi,
            } => Ok(random_strongly_connected(
                *n,
                *p,
                *seed,
                WeightRange {
                    lo: *weight_lo,
                    hi: *weight_hi,
                },
            )?),
            GraphSource::File { path } => io::read_graph(&self.resolve(path)),
        }
    }

    pub fn build_problem(&self, graph: DirectedGraph) -> anyhow::Result<AllocationProblem> {
        let bounds = self.bounds.resolve(&graph)?;
        let cost = CostModel::new(self.problem.cost.into(), RateBounds::shared(graph.node_count(), bounds));
        Ok(AllocationProblem::new(graph, cost, self.problem.eps_bar)?)
    }
}
