//! Node-private and adversarially robust edge-density estimation for random graphs.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: graph types, random-graph samplers, densities and node distance.
//! - [`corruption`]: node-corruption adversaries and lower-bound hard instances.
//! - [`regularity`]: degree pruning, spectral checks and feasibility witnesses.
//! - [`sos`]: polynomial systems, moment relaxations and the first-order feasibility solver.
//! - [`mechanism`]: score functions, exponential mechanisms, robust estimators and baselines.
//! - [`lower_bounds`]: binomial couplings and lower-bound simulations.
//! - [`harness`]: seeded experiment sweeps with CSV output.

pub mod corruption;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod lower_bounds;
pub mod mechanism;
pub mod regularity;
pub mod rng;
pub mod sos;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{DirectedGraph, Graph, ModelParams, ProbabilityMatrix};
