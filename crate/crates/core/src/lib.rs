//! Value-of-information tooling for joint vehicle-following control and
//! C-V2X communication.
//!
//! The crate is organised bottom-up:
//!
//! * [`ssdp`]: sequential stochastic decision processes, exogenous
//!   processes, state augmentations and rollouts.
//! * [`dp`]: the exact tabular oracle (discretisation, value iteration,
//!   policy evaluation, advantages, occupancy measures).
//! * [`nn`]: a small f64 MLP with manual backprop, Adam, replay buffer and a
//!   TD3 trainer.
//! * [`vehicle`]: the predecessor/follower longitudinal model.
//! * [`voi`]: expected, immediate and information-theoretic VoI together
//!   with the Monte Carlo, Q-based and TD-based estimators.
//! * [`comm`]: channel gains, SINR, CAM queues, observation delay and the
//!   coupled control/communication simulator.
//! * [`cli`]: experiment configuration and scenario runners behind the
//!   `voi` binary.

pub mod cli;
pub mod comm;
pub mod dp;
pub mod error;
pub mod nn;
pub mod rng;
pub mod ssdp;
pub mod vehicle;
pub mod voi;

pub use error::{Error, Result};
