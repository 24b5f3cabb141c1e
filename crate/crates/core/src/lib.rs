//! Deep W-Networks: multi-objective deep reinforcement learning.
//!
//! Each objective owns a DQN-style Q-policy that nominates a greedy action
//! and a W-network that scores how much the policy stands to lose if it is
//! not obeyed. At every step the policy with the highest W-value wins and
//! its nominated action is executed.
//!
//! The crate is organised bottom-up:
//!
//! - [`neural`]: feed-forward networks with a dueling head, manual
//!   backpropagation, Adam/RMSprop and soft target updates.
//! - [`replay`]: prioritized experience replay.
//! - [`qpolicy`]: one objective's DQN.
//! - [`wlearning`]: W-networks and the full DWN agent.
//! - [`envs`]: multi-objective mountain car and deep sea treasure.
//! - [`harness`]: configuration, experiment runs, Pareto evaluation.

pub mod envs;
pub mod error;
pub mod exec;
pub mod harness;
pub mod neural;
pub mod qpolicy;
pub mod replay;
pub mod rng;
pub mod wlearning;

pub use error::{Error, Result};
