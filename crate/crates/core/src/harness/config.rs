//! Flat `key = value` experiment configuration.
//!
//! Defaults depend on the environment, so `env` is resolved first and the
//! remaining keys are applied on top in file order. Later keys win.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::envs::{BonusChannels, Encoder};
use crate::error::{Error, Result};
use crate::neural::{OptimizerConfig, OptimizerKind, DEFAULT_HIDDEN, DUELING_WIDTH};
use crate::qpolicy::QConfig;
use crate::replay::ReplayConfig;
use crate::wlearning::{DwnConfig, WConfig, WQAction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvId {
    MountainCar,
    DeepSea,
}

impl EnvId {
    pub fn num_objectives(self) -> usize {
        match self {
            EnvId::MountainCar => 3,
            EnvId::DeepSea => 2,
        }
    }

    /// Episode window for rolling means in the metrics file.
    pub fn rolling_window(self) -> usize {
        match self {
            EnvId::MountainCar => 10,
            EnvId::DeepSea => 50,
        }
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mountain_car" | "mc" => Ok(EnvId::MountainCar),
            "deep_sea" | "deep_sea_treasure" | "dst" => Ok(EnvId::DeepSea),
            other => Err(Error::config(format!("unknown env `{other}`"))),
        }
    }
}

impl std::fmt::Display for EnvId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EnvId::MountainCar => "mountain_car",
            EnvId::DeepSea => "deep_sea",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Dwn,
    DqnSum,
    /// DQN on one reward channel.
    DqnSingle(usize),
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AgentKind::Dwn => f.write_str("dwn"),
            AgentKind::DqnSum => f.write_str("dqn_sum"),
            AgentKind::DqnSingle(c) => write!(f, "dqn_single({c})"),
        }
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dwn" => Ok(AgentKind::Dwn),
            "dqn_sum" => Ok(AgentKind::DqnSum),
            other => {
                let inner = other
                    .strip_prefix("dqn_single(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::config(format!("unknown agent `{other}`")))?;
                let c = inner
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad channel in `{other}`")))?;
                Ok(AgentKind::DqnSingle(c))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvId,
    pub agent: AgentKind,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub encoder: Encoder,
    pub step_cap: usize,
    pub goal_bonus_channels: BonusChannels,
    /// Deep sea layout file; the bundled layout when unset.
    pub layout: Option<PathBuf>,

    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    pub priority_floor: f64,
    pub beta_anneal_batches: u64,
    pub q_epsilon_start: f64,
    pub q_epsilon_decay: f64,
    pub q_epsilon_min: f64,
    pub w_epsilon_start: f64,
    pub w_epsilon_decay: f64,
    pub w_epsilon_min: f64,
    pub q_tau: f64,
    pub w_tau: f64,
    pub batch_size: usize,
    pub memory_size: usize,
    pub q_optimizer: OptimizerKind,
    pub w_optimizer: OptimizerKind,
    pub q_learning_rate: f64,
    pub w_learning_rate: f64,
    pub hidden: Vec<usize>,
    pub dueling_width: usize,
    pub td_clip: Option<f64>,
    pub w_q_action: WQAction,
    pub w_bootstrap_target: bool,

    /// Q checkpoints loaded into a DWN agent before training, one per policy.
    pub pretrained_q: Vec<PathBuf>,
    /// Per-channel DQN episodes in the two-phase protocol.
    pub pretrain_episodes: usize,
}

impl ExperimentConfig {
    pub fn mountain_car() -> Self {
        Self {
            env: EnvId::MountainCar,
            agent: AgentKind::Dwn,
            episodes: 300,
            seeds: vec![1, 2, 3, 4, 5],
            encoder: Encoder::Positional,
            step_cap: crate::envs::mountain_car::STEP_CAP,
            goal_bonus_channels: BonusChannels::All,
            layout: None,
            gamma: 0.99,
            alpha: 1e-3,
            beta: 0.4,
            zeta: 0.6,
            priority_floor: 1e-5,
            beta_anneal_batches: 0,
            q_epsilon_start: 0.95,
            q_epsilon_decay: 0.995,
            q_epsilon_min: 0.1,
            w_epsilon_start: 0.99,
            w_epsilon_decay: 0.9995,
            w_epsilon_min: 0.1,
            q_tau: 1e-3,
            w_tau: 1e-3,
            batch_size: 1024,
            memory_size: 10_000,
            q_optimizer: OptimizerKind::Adam,
            w_optimizer: OptimizerKind::Adam,
            q_learning_rate: 1e-3,
            w_learning_rate: 1e-3,
            hidden: DEFAULT_HIDDEN.to_vec(),
            dueling_width: DUELING_WIDTH,
            td_clip: None,
            w_q_action: WQAction::Executed,
            w_bootstrap_target: false,
            pretrained_q: Vec::new(),
            pretrain_episodes: 1000,
        }
    }

    pub fn deep_sea() -> Self {
        Self {
            env: EnvId::DeepSea,
            episodes: 2000,
            encoder: Encoder::OneHot,
            step_cap: crate::envs::deep_sea::STEP_CAP,
            gamma: 0.9,
            q_epsilon_min: 0.25,
            w_epsilon_min: 0.01,
            memory_size: 100_000,
            q_optimizer: OptimizerKind::RmsProp,
            w_optimizer: OptimizerKind::RmsProp,
            ..Self::mountain_car()
        }
    }

    pub fn defaults(env: EnvId) -> Self {
        match env {
            EnvId::MountainCar => Self::mountain_car(),
            EnvId::DeepSea => Self::deep_sea(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Defaults for the last `env` given (mountain car if none), then every pair in order.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let env = match pairs.iter().rev().find(|(k, _)| k == "env") {
            Some((_, v)) => v.parse()?,
            None => EnvId::MountainCar,
        };
        let mut cfg = Self::defaults(env);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `key=value` overrides on top of this config.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = parse_pairs(&self.to_text())?;
        if let Some((_, env)) = overrides.iter().rev().find(|(k, _)| k == "env") {
            if env.parse::<EnvId>()? != self.env {
                pairs.clear();
            }
        }
        pairs.extend_from_slice(overrides);
        Self::from_pairs(&pairs)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "env" => self.env = v.parse()?,
            "agent" => self.agent = v.parse()?,
            "channel" => {
                self.agent = AgentKind::DqnSingle(num(key, v)?);
            }
            "episodes" => self.episodes = num(key, v)?,
            "seeds" => self.seeds = list(key, v)?,
            "seed" => self.seeds = vec![num(key, v)?],
            "encoder" => self.encoder = v.parse()?,
            "step_cap" => self.step_cap = num(key, v)?,
            "goal_bonus_channels" => self.goal_bonus_channels = v.parse()?,
            "layout" => self.layout = optional_path(v),
            "gamma" => self.gamma = num(key, v)?,
            "alpha" => self.alpha = num(key, v)?,
            "beta" => self.beta = num(key, v)?,
            "zeta" => self.zeta = num(key, v)?,
            "priority_floor" => self.priority_floor = num(key, v)?,
            "beta_anneal_batches" => self.beta_anneal_batches = num(key, v)?,
            "q_epsilon_start" => self.q_epsilon_start = num(key, v)?,
            "q_epsilon_decay" => self.q_epsilon_decay = num(key, v)?,
            "q_epsilon_min" => self.q_epsilon_min = num(key, v)?,
            "w_epsilon_start" => self.w_epsilon_start = num(key, v)?,
            "w_epsilon_decay" => self.w_epsilon_decay = num(key, v)?,
            "w_epsilon_min" => self.w_epsilon_min = num(key, v)?,
            "q_tau" => self.q_tau = num(key, v)?,
            "w_tau" => self.w_tau = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "memory_size" => self.memory_size = num_f64_int(key, v)?,
            "q_optimizer" => self.q_optimizer = v.parse()?,
            "w_optimizer" => self.w_optimizer = v.parse()?,
            "q_learning_rate" => self.q_learning_rate = num(key, v)?,
            "w_learning_rate" => self.w_learning_rate = num(key, v)?,
            "hidden" => self.hidden = list(key, v)?,
            "dueling_width" => self.dueling_width = num(key, v)?,
            "td_clip" => {
                self.td_clip = match v {
                    "" | "none" | "off" => None,
                    _ => Some(num(key, v)?),
                }
            }
            "w_q_action" => self.w_q_action = v.parse()?,
            "w_bootstrap_target" => self.w_bootstrap_target = flag(key, v)?,
            "pretrained_q" => {
                self.pretrained_q = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from)
                    .collect()
            }
            "pretrain_episodes" => self.pretrain_episodes = num(key, v)?,
            other => return Err(Error::config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seed list is empty"));
        }
        if let AgentKind::DqnSingle(c) = self.agent {
            if c >= self.env.num_objectives() {
                return Err(Error::config(format!(
                    "channel {c} out of range for {} ({} objectives)",
                    self.env,
                    self.env.num_objectives()
                )));
            }
        }
        if self.env == EnvId::MountainCar && self.encoder == Encoder::OneHot {
            return Err(Error::config("onehot encoding is not defined for mountain car"));
        }
        if self.step_cap == 0 || self.batch_size == 0 || self.dueling_width == 0 {
            return Err(Error::config("step_cap, batch_size and dueling_width must be >= 1"));
        }
        if self.memory_size < self.batch_size {
            return Err(Error::config(format!(
                "memory_size {} is smaller than batch_size {}",
                self.memory_size, self.batch_size
            )));
        }
        if !self.pretrained_q.is_empty() {
            if self.agent != AgentKind::Dwn {
                return Err(Error::config("pretrained_q applies to dwn agents only"));
            }
            if self.pretrained_q.len() != self.env.num_objectives() {
                return Err(Error::config(format!(
                    "pretrained_q lists {} checkpoints, {} policies expected",
                    self.pretrained_q.len(),
                    self.env.num_objectives()
                )));
            }
        }
        self.dwn_config().q.replay.validate()?;
        if let Some(c) = self.td_clip {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::config("td_clip must be positive"));
            }
        }
        Ok(())
    }

    fn replay(&self) -> ReplayConfig {
        ReplayConfig {
            capacity: self.memory_size,
            zeta: self.zeta,
            beta: self.beta,
            priority_floor: self.priority_floor,
            beta_anneal_batches: self.beta_anneal_batches,
        }
    }

    pub fn q_config(&self) -> QConfig {
        QConfig {
            hidden: self.hidden.clone(),
            dueling_width: self.dueling_width,
            gamma: self.gamma,
            tau: self.q_tau,
            batch_size: self.batch_size,
            replay: self.replay(),
            optimizer: OptimizerConfig::with_kind(self.q_optimizer, self.q_learning_rate),
            epsilon_start: self.q_epsilon_start,
            epsilon_decay: self.q_epsilon_decay,
            epsilon_min: self.q_epsilon_min,
            td_clip: self.td_clip,
        }
    }

    pub fn dwn_config(&self) -> DwnConfig {
        DwnConfig {
            q: self.q_config(),
            w: WConfig {
                hidden: self.hidden.clone(),
                alpha: self.alpha,
                tau: self.w_tau,
                replay: self.replay(),
                optimizer: OptimizerConfig::with_kind(self.w_optimizer, self.w_learning_rate),
                q_action: self.w_q_action,
                bootstrap_target: self.w_bootstrap_target,
            },
            w_epsilon_start: self.w_epsilon_start,
            w_epsilon_decay: self.w_epsilon_decay,
            w_epsilon_min: self.w_epsilon_min,
        }
    }

    /// Every key with its resolved value; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let join = |xs: &[String]| xs.join(",");
        kv("env", self.env.to_string());
        kv("agent", self.agent.to_string());
        kv("episodes", self.episodes.to_string());
        kv("seeds", join(&self.seeds.iter().map(u64::to_string).collect::<Vec<_>>()));
        kv("encoder", self.encoder.to_string());
        kv("step_cap", self.step_cap.to_string());
        kv("goal_bonus_channels", self.goal_bonus_channels.to_string());
        kv(
            "layout",
            self.layout.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        kv("gamma", self.gamma.to_string());
        kv("alpha", self.alpha.to_string());
        kv("beta", self.beta.to_string());
        kv("zeta", self.zeta.to_string());
        kv("priority_floor", self.priority_floor.to_string());
        kv("beta_anneal_batches", self.beta_anneal_batches.to_string());
        kv("q_epsilon_start", self.q_epsilon_start.to_string());
        kv("q_epsilon_decay", self.q_epsilon_decay.to_string());
        kv("q_epsilon_min", self.q_epsilon_min.to_string());
        kv("w_epsilon_start", self.w_epsilon_start.to_string());
        kv("w_epsilon_decay", self.w_epsilon_decay.to_string());
        kv("w_epsilon_min", self.w_epsilon_min.to_string());
        kv("q_tau", self.q_tau.to_string());
        kv("w_tau", self.w_tau.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("memory_size", self.memory_size.to_string());
        kv("q_optimizer", self.q_optimizer.to_string());
        kv("w_optimizer", self.w_optimizer.to_string());
        kv("q_learning_rate", self.q_learning_rate.to_string());
        kv("w_learning_rate", self.w_learning_rate.to_string());
        kv("hidden", join(&self.hidden.iter().map(usize::to_string).collect::<Vec<_>>()));
        kv("dueling_width", self.dueling_width.to_string());
        kv("td_clip", self.td_clip.map(|c| c.to_string()).unwrap_or_else(|| "none".into()));
        kv("w_q_action", self.w_q_action.to_string());
        kv("w_bootstrap_target", self.w_bootstrap_target.to_string());
        kv(
            "pretrained_q",
            join(&self.pretrained_q.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()),
        );
        kv("pretrain_episodes", self.pretrain_episodes.to_string());
        out
    }
}

/// Splits config text into ordered `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", n + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Parses a single `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("`{key}`: cannot parse `{v}`")))
}

/// Integers that may be written in float notation, such as `1e5`.
fn num_f64_int(key: &str, v: &str) -> Result<usize> {
    if let Ok(n) = v.parse() {
        return Ok(n);
    }
    let f: f64 = num(key, v)?;
    if f >= 0.0 && f.fract() == 0.0 {
        Ok(f as usize)
    } else {
        Err(Error::config(format!("`{key}`: `{v}` is not a whole number")))
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(Error::config(format!("`{key}`: expected a boolean, got `{v}`"))),
    }
}

fn optional_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}
