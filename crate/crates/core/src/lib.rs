//! Numerical laboratory for symmetric stable jump processes in confining
//! potentials.
//!
//! Given a stationary target density the crate reconstructs the Langevin drift
//! and the semigroup (Feynman–Kac) potential that both relax to that target,
//! simulates the two resulting jump processes, and evolves the corresponding
//! fractional transport equations on a grid.

pub mod catalog;
pub mod cli;
pub mod compare;
pub mod config;
pub mod drift;
pub mod ensemble;
pub mod error;
pub mod fpe;
pub mod fraclap;
pub mod grid;
pub mod langevin;
pub mod quad;
pub mod report;
pub mod reverse;
pub mod rng;
pub mod semigroup;
pub mod stable;
pub mod stats;

pub use catalog::{catalog_get, Moment, TargetDensity};
pub use drift::Drift;
pub use error::{Error, Result};
pub use fraclap::{Method, OperatorConfig, PvOperator, TailModel};
pub use grid::{GridFunction, GridSpec};
pub use rng::RngStream;
pub use stable::StableParams;
