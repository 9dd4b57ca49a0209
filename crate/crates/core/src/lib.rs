//! Model-free deep actor-critic controllers for set-point tracking.
//!
//! The crate is organized bottom-up:
//!
//! - [`nn`]: dense networks, batch norm, backpropagation and Adam.
//! - [`agent`]: the actor-critic learner (replay memory, target networks,
//!   Ornstein-Uhlenbeck exploration, inverted action gradients).
//! - [`plants`]: simulated processes that generate episodes.
//! - [`env`]: RL state construction, rewards, episode lifecycle and
//!   set-point schedules.
//! - [`tabular`]: finite-MDP Q-learning with an exact value-iteration oracle.
//! - [`harness`]: config-driven experiments, presets, metrics and CSV export.

pub mod agent;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod plants;
pub mod tabular;

pub use error::{Error, Result};
