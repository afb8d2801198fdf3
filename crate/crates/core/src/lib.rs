//! Simulation and statistical inference for (2,1) random walks in i.i.d.
//! parametric random environments.
//!
//! The walk jumps `-2`, `-1` or `+1` from site `x` with probabilities drawn
//! once per site from a parametric law `ν_θ`. From a single path observed up
//! to the first hitting time of a distant site `n`, the crate computes the
//! criterion `l_n(θ)` and its maximizer, and ships the branching-process and
//! random-matrix machinery (offspring laws, generating functions, Lyapunov
//! exponents, transition kernel, invariant law, speed) used to check every
//! identity behind the estimator numerically.
//!
//! Module map:
//!
//! * [`env`] environment families, site sampling and moment integrals
//! * [`walk`] quenched walk simulation and jump counts
//! * [`bpire`] the 3-type branching process with immigration hidden in a path
//! * [`spectral`] matrix products, Lyapunov exponents, S-sums, invariant law, speed
//! * [`likelihood`] the criterion function and the annealed kernel
//! * [`estimate`] grid + simplex M-estimation and consistency experiments
//! * [`cli`] configuration, seeding and file output for the `rwre` binary

pub mod bpire;
pub mod cli;
pub mod env;
pub mod error;
pub mod estimate;
pub mod likelihood;
pub mod numeric;
pub mod seeding;
pub mod sites;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
