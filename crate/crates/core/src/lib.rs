//! Cost-optimal allocation of vaccines and antidotes for SIS epidemics on
//! directed contact networks.
//!
//! The crate is `no_std` (it needs `alloc`). It contains:
//!
//! * [`graph`]: weighted digraphs, strong connectivity, seeded random instances.
//! * [`spectral`]: Perron roots and vectors of nonnegative matrices, and the
//!   spectral abscissa of `BA - D` that governs exponential decay.
//! * [`epidemic`]: the mean-field ODE, a discrete-time Monte Carlo simulator of
//!   the networked Markov process, and decay-rate verification.
//! * [`costs`]: vaccine and antidote cost models.
//! * [`convex`]: a small log-barrier solver for programs with log-sum-exp
//!   inequalities, affine equalities and boxes.
//! * [`centralized`]: the allocation problem as a geometric program.
//! * [`dadmm`]: the distributed ADMM runtime over simulated agents.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod centralized;
pub mod convex;
pub mod costs;
pub mod dadmm;
pub mod epidemic;
mod error;
pub mod graph;
pub mod linalg;
pub mod spectral;

pub use error::{Error, Result};
