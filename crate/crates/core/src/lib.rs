//! Simulation and verification toolkit for the two-parameter Poisson-Dirichlet family.
//!
//! The crate provides stick-breaking, Chinese-restaurant, subordinator and branching
//! samplers, the size-biased fragmentation operator `Frag_alpha` and its dual coagulation
//! operator `Coag_{alpha,theta}`, the Markov chains they generate, and the
//! `(alpha, theta)`-recursive tree that encodes those chains. Every distributional identity is
//! checked by Monte Carlo suites in [`suites`].
//!
//! Indices are zero-based throughout: the largest atom of a [`MassPartition`] is atom `0`.

// `!(x > 0.0)` guards deliberately reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod cli;
pub mod error;
pub mod fenwick;
pub mod numerics;
pub mod operators;
pub mod partition;
pub mod rectree;
pub mod samplers;
pub mod stattest;
pub mod suites;

pub use error::{Error, Result};
pub use numerics::RngStream;
pub use partition::{
    BlockFrequencies, MassPartition, Params, SbIndex, SetPartition, SizeBiasedWeights, Tail,
    TailLaw,
};
pub use samplers::Truncation;
