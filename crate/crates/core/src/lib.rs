//! A desk-scale laboratory for the computational gap between unconditional
//! and posterior sampling with diffusion models.
//!
//! The crate builds the hard instance family (hypercube Gaussians whose seed
//! is hidden behind a circuit and encoded in the phase of discretized
//! Gaussians), its exact smoothed scores, explicit ReLU networks that
//! approximate those scores, a variance-exploding reverse-SDE sampler,
//! posterior samplers (rejection, brute force, guidance heuristic), and the
//! reduction that turns any posterior sampler into a circuit inverter.
//!
//! Every stochastic routine takes an explicit random stream; see [`rng`].

pub mod circuit;
pub mod diagnostics;
pub mod diffusion;
pub mod error;
pub mod fmt;
pub mod instance;
pub mod linalg;
pub mod mixture2d;
pub mod piecewise;
pub mod posterior;
pub mod reduction;
pub mod relu;
pub mod rng;
pub mod scores;
pub mod special;

pub use error::{Error, Result};
