//! Deterministic multi-objective benchmark environments.

pub mod deep_sea;
pub mod mountain_car;
pub mod pareto;

use std::ops::Index;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use deep_sea::{DeepSeaConfig, DeepSeaTreasure, DstAction, DstLayout};
pub use mountain_car::{BonusChannels, McAction, MountainCar, MountainCarConfig};
pub use pareto::{dst_pareto_oracle, pareto_filter, ParetoPoint};

use crate::error::{Error, Result};

/// One reward per objective, index-aligned with the agent's policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardVector(pub Vec<f32>);

impl RewardVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

impl Index<usize> for RewardVector {
    type Output = f32;

    fn index(&self, i: usize) -> &f32 {
        &self.0[i]
    }
}

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub rewards: RewardVector,
    /// A goal or treasure was reached; values do not bootstrap past this step.
    pub terminal: bool,
    /// The step cap ended the episode.
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoder {
    /// Normalized coordinates.
    Positional,
    /// Grid indicator vector (deep sea treasure only).
    OneHot,
}

impl FromStr for Encoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positional" => Ok(Encoder::Positional),
            "onehot" | "one_hot" => Ok(Encoder::OneHot),
            other => Err(Error::config(format!("unknown encoder `{other}`"))),
        }
    }
}

impl std::fmt::Display for Encoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Encoder::Positional => "positional",
            Encoder::OneHot => "onehot",
        })
    }
}

/// A multi-objective episodic environment with a discrete action set.
pub trait Environment {
    fn num_objectives(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn observation_dim(&self) -> usize;
    /// Encoded observation of the current state.
    fn observe(&self) -> Vec<f32>;
    fn reset(&mut self);
    fn step(&mut self, action: usize) -> Result<Step>;
    fn is_done(&self) -> bool;
    /// Steps taken in the current episode.
    fn steps(&self) -> usize;
}
