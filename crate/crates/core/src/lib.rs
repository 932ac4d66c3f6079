//! Reinforcement-learned initial solutions for simulated annealing on
//! one-dimensional bin packing.
//!
//! A PPO agent perturbs a random packing for a fixed number of steps, a
//! simulated annealer continues from the agent's final packing, and the
//! annealer's cost improvement is fed back to the agent as the value of the
//! state it handed over. The crate also provides the random-initialization
//! and pure-RL baselines, an exact solver for small instances and an
//! experiment harness that writes JSONL records.

pub mod binpack;
pub mod error;
pub mod exact;
pub mod harness;
pub mod policy;
pub mod rlho;
pub mod rng;
pub mod sa;

pub use error::{Error, Result};
