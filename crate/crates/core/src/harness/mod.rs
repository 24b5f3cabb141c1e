//! Experiment orchestration: configuration, seeded runs, metrics and
//! Pareto evaluation.
//!
//! A run directory looks like:
//!
//! ```text
//! <out>/config.resolved     every key, one `key = value` per line
//! <out>/episodes.csv        one row per (seed, episode)
//! <out>/summary.json        per-seed final-window statistics
//! <out>/checkpoints/        seed-<s>.json per completed seed
//! <out>/FAILED              present when a seed aborted, one line per seed
//! ```

mod config;
mod evaluate;
mod run;
pub mod selftest;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use config::{parse_override, parse_pairs, AgentKind, EnvId, ExperimentConfig};
pub use evaluate::{evaluate_pareto, final_point, load_episodes, ParetoEvaluation, PARETO_WINDOW};
pub use run::{
    pretrain_seed, pretrain_then_transfer, run_experiment, run_seed, run_seed_with, EpisodeRecord,
    PretrainRun, SeedRun, SeedSummary,
};

use crate::envs::{
    DeepSeaConfig, DeepSeaTreasure, DstLayout, Environment, MountainCar, MountainCarConfig, Step,
};
use crate::error::Result;
use crate::qpolicy::{DqnAgent, QPolicyCheckpoint, RewardReduction};
use crate::wlearning::{AgentCheckpoint, DwnAgent};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "DWN_OUTPUT_ROOT";

/// `$DWN_OUTPUT_ROOT`, or `runs` in the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Either benchmark behind one type.
#[derive(Debug, Clone)]
pub enum AnyEnv {
    MountainCar(MountainCar),
    DeepSea(DeepSeaTreasure),
}

impl AnyEnv {
    pub fn build(cfg: &ExperimentConfig, layout: Option<Arc<DstLayout>>) -> Result<Self> {
        match cfg.env {
            EnvId::MountainCar => Ok(AnyEnv::MountainCar(MountainCar::new(MountainCarConfig {
                step_cap: cfg.step_cap,
                bonus_channels: cfg.goal_bonus_channels,
                encoder: cfg.encoder,
            })?)),
            EnvId::DeepSea => {
                let layout = match layout {
                    Some(l) => l,
                    None => Arc::new(load_layout(cfg)?),
                };
                Ok(AnyEnv::DeepSea(DeepSeaTreasure::new(
                    layout,
                    DeepSeaConfig {
                        step_cap: cfg.step_cap,
                        encoder: cfg.encoder,
                    },
                )?))
            }
        }
    }

    fn inner(&self) -> &dyn Environment {
        match self {
            AnyEnv::MountainCar(e) => e,
            AnyEnv::DeepSea(e) => e,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Environment {
        match self {
            AnyEnv::MountainCar(e) => e,
            AnyEnv::DeepSea(e) => e,
        }
    }
}

impl Environment for AnyEnv {
    fn num_objectives(&self) -> usize {
        self.inner().num_objectives()
    }

    fn num_actions(&self) -> usize {
        self.inner().num_actions()
    }

    fn observation_dim(&self) -> usize {
        self.inner().observation_dim()
    }

    fn observe(&self) -> Vec<f32> {
        self.inner().observe()
    }

    fn reset(&mut self) {
        self.inner_mut().reset()
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        self.inner_mut().step(action)
    }

    fn is_done(&self) -> bool {
        self.inner().is_done()
    }

    fn steps(&self) -> usize {
        self.inner().steps()
    }
}

/// The configured deep sea layout, or the bundled one.
pub fn load_layout(cfg: &ExperimentConfig) -> Result<DstLayout> {
    match &cfg.layout {
        Some(path) => DstLayout::load(path),
        None => Ok(DstLayout::standard()),
    }
}

/// An agent of any configured kind.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Agent {
    Dwn(DwnAgent),
    Dqn(DqnAgent),
}

/// What a step looked like from outside the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSummary {
    pub rewards: Vec<f32>,
    pub terminal: bool,
    pub done: bool,
    pub winner: Option<usize>,
}

impl Agent {
    pub fn build(cfg: &ExperimentConfig, env: &AnyEnv, seed: u64) -> Result<Self> {
        let (dim, actions) = (env.observation_dim(), env.num_actions());
        Ok(match cfg.agent {
            AgentKind::Dwn => Agent::Dwn(DwnAgent::new(
                env.num_objectives(),
                dim,
                actions,
                &cfg.dwn_config(),
                seed,
            )?),
            AgentKind::DqnSum => {
                Agent::Dqn(DqnAgent::new(dim, actions, RewardReduction::Sum, &cfg.q_config(), seed)?)
            }
            AgentKind::DqnSingle(c) => Agent::Dqn(DqnAgent::new(
                dim,
                actions,
                RewardReduction::Channel(c),
                &cfg.q_config(),
                seed,
            )?),
        })
    }

    pub fn step(&mut self, env: &mut AnyEnv) -> Result<StepSummary> {
        match self {
            Agent::Dwn(a) => {
                let r = a.step(env)?;
                Ok(StepSummary {
                    done: r.terminal || r.truncated,
                    rewards: r.rewards.0,
                    terminal: r.terminal,
                    winner: Some(r.winner),
                })
            }
            Agent::Dqn(a) => {
                let r = a.step(env)?;
                Ok(StepSummary {
                    done: r.terminal || r.truncated,
                    rewards: r.rewards.0,
                    terminal: r.terminal,
                    winner: None,
                })
            }
        }
    }

    pub fn num_policies(&self) -> usize {
        match self {
            Agent::Dwn(a) => a.num_policies(),
            Agent::Dqn(_) => 0,
        }
    }

    pub fn checkpoint(&self) -> RunCheckpoint {
        match self {
            Agent::Dwn(a) => RunCheckpoint::Dwn(a.checkpoint()),
            Agent::Dqn(a) => RunCheckpoint::Dqn(a.policy().checkpoint()),
        }
    }
}

/// Final agent state written to `checkpoints/seed-<s>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
#[serde(tag = "agent", rename_all = "snake_case")]
pub enum RunCheckpoint {
    Dwn(AgentCheckpoint),
    Dqn(QPolicyCheckpoint),
}
