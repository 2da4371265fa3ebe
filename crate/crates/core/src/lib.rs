//! Multi-cell downlink power control simulator.
//!
//! Simulates a square grid of base stations serving mobile users over a
//! temporally correlated Rayleigh-fading channel, trains per-BS deep RL
//! agents (value-based and policy-gradient) under federated, distributed,
//! or centralized orchestration, and benchmarks against Max Power and
//! WMMSE allocators.

// Index-heavy numeric kernels keep explicit loop indices.
#![allow(clippy::needless_range_loop)]

pub mod agents;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod netsim;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
