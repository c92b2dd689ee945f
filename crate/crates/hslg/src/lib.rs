//! Simulation and verification laboratory for the half-space log-gamma
//! (HSLG) polymer, its Gibbsian line ensemble, and the diffusive limit
//! laws of the associated one-sided Gibbs measures.
//!
//! The crate is organized around six subsystems:
//!
//! * [`rng`] / [`env`] — seeded inverse-gamma environments;
//! * [`polymer`] / [`ensemble`] — exact log-scale partition-function
//!   dynamic programming and the line-ensemble construction;
//! * [`gibbs`] / [`glauber`] — discrete and continuum Gibbs measures,
//!   importance sampling, path-space Metropolis, monotone couplings;
//! * [`limits`] — closed-form kernels and exact samplers for the
//!   limiting conditioned Brownian objects;
//! * [`stats`] — log-sum-exp, Kolmogorov–Smirnov machinery, digamma;
//! * [`experiments`] — the reproducible experiment registry behind the
//!   `hslg` command-line runner.

pub mod enumerate;
pub mod env;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod gibbs;
pub mod glauber;
pub mod limits;
pub mod polymer;
pub mod quad;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use rng::RngState;
