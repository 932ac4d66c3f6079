//! Policy/value network and its PPO trainer.

pub mod checkpoint;
pub mod network;
pub mod ppo;

pub use network::{greedy_action, log_softmax, sample_action, softmax, PolicyParams};
pub use ppo::{
    returns_and_advantages, Batch, Learner, LossParts, PpoConfig, Transition, UpdateStats,
};
