//! Causality-informed deep Q-network for sensor scheduling in partially
//! observed data streams.
//!
//! Only `m` of `p` streams can be observed at each step. The library learns
//! which streams to watch so that mean shifts are detected as quickly as
//! possible, exploiting the causal structure between streams:
//!
//! - [`streams`] generates synthetic multivariate streams over a random DAG
//!   (linear-Gaussian structural model) with injected mean shifts, and
//!   ingests external CSV streams.
//! - [`discovery`] estimates a causal graph from data (PC-style skeleton +
//!   orientation) and derives the causal propagation effect matrix `eta`.
//! - [`monitor`] maintains the recursive Bayesian detection statistic under
//!   partial observation and decides chi-square alarms.
//! - [`qnet`] is a small feedforward double Q-network with a Boltzmann
//!   policy, causal-entropy regularization, and a replay buffer.
//! - [`envir`] binds streams, monitor and reward into an episodic
//!   environment.
//! - [`harness`] trains, evaluates detection delay over replications, and
//!   reproduces the experiment presets.
//! - [`theory`] numerically certifies the contraction / bound / convergence
//!   results on tabular toy MDPs.

// index loops over several same-length tensors read better than zipped
// iterator chains in the matrix code below
#![allow(clippy::needless_range_loop)]

pub mod discovery;
pub mod envir;
pub mod harness;
pub mod linalg;
pub mod monitor;
pub mod qnet;
pub mod stats;
pub mod streams;
pub mod theory;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user input was violated.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A matrix that must be symmetric positive definite was not.
    #[error("matrix not positive definite: {0}")]
    NotSpd(String),
    /// A linear system could not be solved.
    #[error("singular system: {0}")]
    Singular(String),
    /// A parse failure with location diagnostics.
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    /// A non-finite value was produced where finite math is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// An iterative solver failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Splitmix64 step, used to derive independent sub-seeds from a base seed.
pub(crate) fn mix_seed(base: u64, tag: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
