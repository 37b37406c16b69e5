//! Closed-drafting (pick-and-pass) card games as finite-horizon POMDPs,
//! with self-play DQN agents and analysis tooling: cross-configuration
//! generalization sweeps, memory influence measurement, and decision-rule
//! interpretability.

pub mod agents;
pub mod cards;
pub mod dqn;
pub mod error;
pub mod game;
pub mod interpret;
pub mod logs;
pub mod metrics;
pub mod net;
pub mod observe;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
