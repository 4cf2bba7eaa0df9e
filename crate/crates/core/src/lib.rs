//! Flexibility pooling for distributed energy resources.
//!
//! The library describes each resource's feasible power trajectories as a
//! polytope, inner-approximates it with a structured zonotope family whose
//! Minkowski sums are closed form, aggregates per-system piecewise-linear
//! costs, disaggregates aggregate trajectories back to members at minimum
//! cost with a projected subgradient method, and prices regulation-power
//! commitments on top of the aggregate.

pub mod costs;
pub mod disagg;
pub mod error;
pub mod fleet;
pub mod mat;
pub mod optim;
pub mod polytope;
pub mod regulation;
pub mod rng;
pub mod zonofit;
pub mod zonotope;

pub use error::{Error, Result};
