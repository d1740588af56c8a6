//! Bayesian multilevel areal regression with Leroux CAR random effects,
//! plus a closed-form answer to a design question: how many replicates per
//! area does a study need before an exchangeable random-effect model is a
//! safe substitute for the spatial one?
//!
//! The crate provides:
//!
//! - [`graph`]: areal adjacency structure, random connected maps, queen
//!   grids, Laplacians, and a small text interchange format.
//! - [`spectral`]: Laplacian eigendecomposition and O(n) spectral identities
//!   for the Leroux precision Q(rho) = rho L + (1 - rho) I and the marginal
//!   covariance of balanced designs.
//! - [`data`]: replicated areal datasets, covariate standardization, the
//!   C1/C2/C3 covariate structures, and model simulation.
//! - [`threshold`]: the closed-form slope precision under both models, the
//!   exact and leading-order gap between them, and the minimum replicate
//!   count m* at which the gap drops below a tolerance.
//! - [`sampler`]: Gibbs/Metropolis chains for the spatial and exchangeable
//!   models, bit-reproducible given a seed.
//! - [`simstudy`]: a deterministic, parallel simulation harness that checks
//!   the threshold against what the samplers actually do.
//! - [`validate`]: dense linear-algebra oracles and a validation harness
//!   pitting the closed forms against them.
//!
//! Batch layers run on rayon when the default `parallel` feature is on and
//! degrade to sequential execution without it; results are identical either
//! way.

pub mod data;
pub mod error;
pub mod exec;
pub mod graph;
pub mod rng;
pub mod sampler;
pub mod simstudy;
pub mod spectral;
pub mod threshold;
pub mod validate;

pub use error::{Error, Result};
