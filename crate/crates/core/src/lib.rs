//! Simulation-based calibration checking for Bayesian inference.
//!
//! The crate provides the pieces needed to run calibration campaigns end to
//! end: generative model implementations with constrained/unconstrained
//! parameter views, an embedded gradient-based MCMC sampler with adaptation
//! and convergence diagnostics, prior- and posterior-mode SBC orchestration,
//! and graphical uniformity testing of the resulting rank statistics with
//! simultaneous confidence bands.

pub mod data;
pub mod error;
pub mod model;
pub mod ode;
pub mod rng;
pub mod sampler;
pub mod sbc;
pub mod uniformity;

pub use data::Dataset;
pub use model::{Model, ParamVec};
pub use rng::{RandomStream, SeedTree};
