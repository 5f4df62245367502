use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "no strongly connected graph after {attempts} attempts (n = {n}, p = {p}); \
         the edge probability is probably too small"
    )]
    GenerationExhausted { n: usize, p: f64, attempts: usize },

    #[error("matrix is not irreducible (its support graph is not strongly connected)")]
    NotIrreducible,

    #[error("matrix has a negative entry at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize },

    #[error("power iteration did not converge in {iterations} iterations (bound gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("integration step rejected: clamp correction {clamp:e} exceeds threshold; reduce dt")]
    StepRejected { clamp: f64 },

    #[error("per-step transition probability {probability} at node {node} is not below 1; reduce dt")]
    ProbabilityOverflow { node: usize, probability: f64 },

    #[error("trajectory has {found} samples in the fit window, need at least {needed}")]
    TooFewSamples { found: usize, needed: usize },

    #[error("program is infeasible (phase-one optimum {phase_one_value:e})")]
    Infeasible { phase_one_value: f64 },

    #[error("solver hit its iteration limit ({iterations} iterations)")]
    MaxIterations { iterations: usize },

    #[error("linear system is numerically singular")]
    Singular,

    #[error("agent {agent}: {source}")]
    Agent {
        agent: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}
