//! W-networks and the DWN agent.
//!
//! Every objective owns a Q-policy (what it would do) and a W-policy (how
//! much it minds not being obeyed). Each step the policy with the largest
//! W-value wins and its nominated action is executed. All Q buffers receive
//! the step; only the losers' W buffers do.

use std::str::FromStr;

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envs::{Environment, RewardVector};
use crate::error::{Error, Result};
use crate::exec;
use crate::neural::{
    soft_update, Head, Network, NetworkCheckpoint, NetworkSpec, OptimizerConfig, OptimizerState,
    DEFAULT_HIDDEN,
};
use crate::qpolicy::{
    argmax, gather, EpsilonSchedule, QConfig, QPolicy, QPolicyCheckpoint, TrainOutcome, TrainStats,
};
use crate::replay::{PrioritizedReplay, ReplayConfig, SampleBatch, Transition};
use crate::rng::{self, Rng, Stream};

/// Which action the W target evaluates policy i's Q-network at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WQAction {
    /// The winner's action, as stored in the transition.
    Executed,
    /// Policy i's own greedy action in the stored state.
    Nominated,
}

impl FromStr for WQAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "executed" => Ok(WQAction::Executed),
            "nominated" => Ok(WQAction::Nominated),
            other => Err(Error::config(format!("unknown w_q_action `{other}`"))),
        }
    }
}

impl std::fmt::Display for WQAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WQAction::Executed => "executed",
            WQAction::Nominated => "nominated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WConfig {
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub tau: f64,
    pub replay: ReplayConfig,
    pub optimizer: OptimizerConfig,
    pub q_action: WQAction,
    /// Read the blended `w_current` from the target W-network.
    pub bootstrap_target: bool,
}

impl Default for WConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN.to_vec(),
            alpha: 1e-3,
            tau: 1e-3,
            replay: ReplayConfig::new(10_000, 0.6, 0.4),
            optimizer: OptimizerConfig::adam(1e-3),
            q_action: WQAction::Executed,
            bootstrap_target: false,
        }
    }
}

impl WConfig {
    pub fn spec(&self, input_dim: usize) -> NetworkSpec {
        NetworkSpec {
            input_dim,
            hidden_dims: self.hidden.clone(),
            head: Head::Plain,
            output_dim: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::config(format!("w tau {} outside [0, 1]", self.tau)));
        }
        self.replay.validate()
    }
}

/// Blended W regression target for one transition:
/// `(1 - alpha) * w_current + alpha * (Q_i(s, a) - y_i)`.
#[allow(clippy::too_many_arguments)]
pub fn w_target(
    w_current: f32,
    q: &QPolicy,
    state: &[f32],
    action: usize,
    reward: f32,
    next_state: &[f32],
    terminal: bool,
    alpha: f64,
) -> Result<f32> {
    let q_sa = *q
        .q_values(state)?
        .get(action)
        .ok_or_else(|| Error::config(format!("action {action} out of range")))?;
    let y = q.td_target(reward, next_state, terminal)?;
    Ok(blend(w_current, q_sa - y, alpha as f32))
}

fn blend(w_current: f32, surprise: f32, alpha: f32) -> f32 {
    (1.0 - alpha) * w_current + alpha * surprise
}

/// Epsilon-greedy choice of the winning policy; ties go to the lowest index.
pub fn select_policy(w_values: &[f32], epsilon: f64, rng: &mut Rng) -> Result<usize> {
    if w_values.is_empty() {
        return Err(Error::config("policy selection needs at least one W-value"));
    }
    if rng.random::<f64>() < epsilon {
        Ok(rng.random_range(0..w_values.len()))
    } else {
        Ok(argmax(w_values))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WPolicyCheckpoint {
    pub online: NetworkCheckpoint<f32>,
    pub target: NetworkCheckpoint<f32>,
}

#[derive(Debug, Clone)]
pub struct WPolicy {
    id: usize,
    online: Network<f32>,
    target: Network<f32>,
    optimizer: OptimizerState<f32>,
    replay: PrioritizedReplay,
    alpha: f64,
    tau: f64,
    batch_size: usize,
    q_action: WQAction,
    bootstrap_target: bool,
    rng: Rng,
}

impl WPolicy {
    pub fn new(id: usize, input_dim: usize, cfg: &WConfig, batch_size: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        let spec = cfg.spec(input_dim);
        let mut init = rng::stream(seed, Stream::WInit(id));
        let online = Network::new(spec.clone(), &mut init)?;
        Ok(Self {
            id,
            target: online.clone(),
            optimizer: OptimizerState::new(cfg.optimizer, &spec),
            online,
            replay: PrioritizedReplay::new(cfg.replay)?,
            alpha: cfg.alpha,
            tau: cfg.tau,
            batch_size,
            q_action: cfg.q_action,
            bootstrap_target: cfg.bootstrap_target,
            rng: rng::stream(seed, Stream::WPolicy(id)),
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn online(&self) -> &Network<f32> {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut Network<f32> {
        &mut self.online
    }

    pub fn target(&self) -> &Network<f32> {
        &self.target
    }

    pub fn replay(&self) -> &PrioritizedReplay {
        &self.replay
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn w_value(&self, state: &[f32]) -> Result<f32> {
        Ok(self.online.forward(state)?[0])
    }

    pub fn record(&mut self, state: &[f32], action: usize, reward: f32, next_state: &[f32], terminal: bool) {
        self.replay.store(Transition {
            state: state.to_vec(),
            action,
            reward,
            next_state: next_state.to_vec(),
            terminal,
        });
    }

    /// One prioritized regression step toward the blended targets, using
    /// `q` (the same objective's Q-policy) for the surprise term.
    pub fn train_step(&mut self, q: &QPolicy) -> Result<TrainOutcome> {
        let Some(batch) = self.replay.sample(self.batch_size, &mut self.rng) else {
            return Ok(TrainOutcome::Skipped);
        };
        self.train_on_batch(q, &batch)
    }

    /// Training update on an explicit sample (exposed for tests).
    pub fn train_on_batch(&mut self, q: &QPolicy, sample: &SampleBatch) -> Result<TrainOutcome> {
        let tb = gather(&self.replay, &sample.indices)?;
        let k = sample.len();
        let q_now = q.online().forward_batch(tb.states.view())?;
        let q_next = q.target().forward_batch(tb.next_states.view())?;
        let cache = self.online.forward_cached(tb.states.view())?;
        let w_current = if self.bootstrap_target {
            self.target.forward_batch(tb.states.view())?
        } else {
            cache.output.clone()
        };

        let gamma = q.gamma();
        let alpha = self.alpha as f32;
        let scale = 1.0 / k as f64;
        let mut out_grad = Array2::<f32>::zeros((k, 1));
        let mut deltas = Vec::with_capacity(k);
        let mut loss = 0.0f64;
        let mut abs_sum = 0.0f64;
        for i in 0..k {
            let row = q_now.row(i);
            let q_sa = match self.q_action {
                WQAction::Executed => *row
                    .get(tb.actions[i])
                    .ok_or_else(|| Error::Internal(format!("stored action {} out of range", tb.actions[i])))?,
                WQAction::Nominated => row.iter().copied().fold(f32::NEG_INFINITY, f32::max),
            };
            let mut y = tb.rewards[i];
            if !tb.terminal[i] {
                y += gamma * q_next.row(i).iter().copied().fold(f32::NEG_INFINITY, f32::max);
            }
            let target = blend(w_current[[i, 0]], q_sa - y, alpha);
            let delta = (target - cache.output[[i, 0]]) as f64;
            let w = sample.weights[i];
            out_grad[[i, 0]] = (-w * delta * scale) as f32;
            loss += 0.5 * w * delta * delta * scale;
            abs_sum += delta.abs();
            deltas.push(delta);
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                what: "W loss",
                layer: self.online.params().layers.len() - 1,
            });
        }
        let grads = self.online.backward(&cache, out_grad.view())?;
        self.optimizer.apply(self.online.params_mut(), &grads)?;
        self.replay.update_priorities(&sample.indices, &deltas)?;
        soft_update(self.target.params_mut(), self.online.params(), self.tau)?;
        Ok(TrainOutcome::Trained(TrainStats {
            mean_abs_td: abs_sum * scale,
            loss,
        }))
    }

    pub fn checkpoint(&self) -> WPolicyCheckpoint {
        WPolicyCheckpoint {
            online: NetworkCheckpoint::of(&self.online, Some(&self.optimizer)),
            target: NetworkCheckpoint::of(&self.target, None),
        }
    }

    pub fn load_checkpoint(&mut self, ck: &WPolicyCheckpoint) -> Result<()> {
        let spec = self.online.spec().clone();
        let online = ck.online.restore(&spec, &format!("w{}.online", self.id))?;
        let target = ck.target.restore(&spec, &format!("w{}.target", self.id))?;
        if let Some(opt) = &ck.online.optimizer {
            self.optimizer = opt.clone();
        }
        self.online = online;
        self.target = target;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwnConfig {
    pub q: QConfig,
    pub w: WConfig,
    pub w_epsilon_start: f64,
    pub w_epsilon_decay: f64,
    pub w_epsilon_min: f64,
}

impl Default for DwnConfig {
    fn default() -> Self {
        Self {
            q: QConfig::default(),
            w: WConfig::default(),
            w_epsilon_start: 0.99,
            w_epsilon_decay: 0.9995,
            w_epsilon_min: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    QTraining,
    WTraining,
}

/// Everything observable about one agent step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub state: Vec<f32>,
    pub nominations: Vec<usize>,
    pub w_values: Vec<f32>,
    pub winner: usize,
    pub action: usize,
    pub rewards: RewardVector,
    pub next_state: Vec<f32>,
    pub terminal: bool,
    pub truncated: bool,
    /// Whether policy i's W buffer received this step.
    pub w_stored: Vec<bool>,
    pub q_training: Vec<TrainOutcome>,
    pub w_training: Vec<TrainOutcome>,
    /// Training phases in the order they completed.
    pub order: Vec<Phase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub q: Vec<QPolicyCheckpoint>,
    pub w: Vec<WPolicyCheckpoint>,
    pub channels: Vec<usize>,
    pub w_epsilon: EpsilonSchedule,
    pub steps: u64,
}

#[derive(Debug, Clone)]
pub struct DwnAgent {
    q: Vec<QPolicy>,
    w: Vec<WPolicy>,
    /// Reward channel read by policy i.
    channels: Vec<usize>,
    w_epsilon: EpsilonSchedule,
    selection_rng: Rng,
    last_winner: Option<usize>,
    steps: u64,
}

impl DwnAgent {
    /// One policy pair per reward channel `0..n`.
    pub fn new(n: usize, input_dim: usize, num_actions: usize, cfg: &DwnConfig, seed: u64) -> Result<Self> {
        Self::with_channels((0..n).collect(), input_dim, num_actions, cfg, seed)
    }

    /// Policy i learns from reward channel `channels[i]`.
    pub fn with_channels(
        channels: Vec<usize>,
        input_dim: usize,
        num_actions: usize,
        cfg: &DwnConfig,
        seed: u64,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::config("DWN needs at least one policy"));
        }
        let q = (0..channels.len())
            .map(|i| QPolicy::new(i, input_dim, num_actions, &cfg.q, seed))
            .collect::<Result<Vec<_>>>()?;
        let w = (0..channels.len())
            .map(|i| WPolicy::new(i, input_dim, &cfg.w, cfg.q.batch_size, seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            q,
            w,
            channels,
            w_epsilon: EpsilonSchedule::new(cfg.w_epsilon_start, cfg.w_epsilon_decay, cfg.w_epsilon_min)?,
            selection_rng: rng::stream(seed, Stream::Selection),
            last_winner: None,
            steps: 0,
        })
    }

    pub fn num_policies(&self) -> usize {
        self.q.len()
    }

    pub fn q_policies(&self) -> &[QPolicy] {
        &self.q
    }

    pub fn q_policies_mut(&mut self) -> &mut [QPolicy] {
        &mut self.q
    }

    pub fn w_policies(&self) -> &[WPolicy] {
        &self.w
    }

    pub fn w_policies_mut(&mut self) -> &mut [WPolicy] {
        &mut self.w
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn w_epsilon(&self) -> &EpsilonSchedule {
        &self.w_epsilon
    }

    pub fn set_w_epsilon(&mut self, epsilon: EpsilonSchedule) {
        self.w_epsilon = epsilon;
    }

    pub fn last_winner(&self) -> Option<usize> {
        self.last_winner
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn w_values(&self, state: &[f32]) -> Result<Vec<f32>> {
        self.w.iter().map(|w| w.w_value(state)).collect()
    }

    /// Stores the step in every W buffer except the winner's.
    pub fn record_w_transitions(
        &mut self,
        winner: usize,
        state: &[f32],
        action: usize,
        rewards: &RewardVector,
        next_state: &[f32],
        terminal: bool,
    ) -> Result<Vec<bool>> {
        let mut stored = vec![false; self.w.len()];
        for (i, w) in self.w.iter_mut().enumerate() {
            if i == winner {
                continue;
            }
            w.record(state, action, channel(rewards, self.channels[i])?, next_state, terminal);
            stored[i] = true;
        }
        Ok(stored)
    }

    /// Observe, nominate, arbitrate, act, store, then train Q and W.
    pub fn step<E: Environment>(&mut self, env: &mut E) -> Result<StepRecord> {
        if env.is_done() {
            return Err(Error::EpisodeState("step on finished episode".into()));
        }
        let state = env.observe();
        let nominations = self
            .q
            .iter_mut()
            .map(|q| q.nominate_action(&state))
            .collect::<Result<Vec<_>>>()?;
        let w_values = self.w_values(&state)?;
        let winner = select_policy(&w_values, self.w_epsilon.current(), &mut self.selection_rng)?;
        let action = nominations[winner];

        let outcome = env.step(action)?;
        let next_state = env.observe();
        for (q, &c) in self.q.iter_mut().zip(&self.channels) {
            q.record_transition(&state, action, channel(&outcome.rewards, c)?, &next_state, outcome.terminal);
        }
        let w_stored = self.record_w_transitions(
            winner,
            &state,
            action,
            &outcome.rewards,
            &next_state,
            outcome.terminal,
        )?;

        let mut order = Vec::with_capacity(2);
        let q_training = exec::map_mut(&mut self.q, |_, q| q.train_step())
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        order.push(Phase::QTraining);
        let mut pairs: Vec<(&mut WPolicy, &QPolicy)> = self.w.iter_mut().zip(self.q.iter()).collect();
        let w_training = exec::map_mut(&mut pairs, |_, (w, q)| w.train_step(q))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        order.push(Phase::WTraining);
        for _ in w_training.iter().filter(|o| o.trained()) {
            self.w_epsilon.step();
        }

        self.last_winner = Some(winner);
        self.steps += 1;
        Ok(StepRecord {
            state,
            nominations,
            w_values,
            winner,
            action,
            rewards: outcome.rewards,
            next_state,
            terminal: outcome.terminal,
            truncated: outcome.truncated,
            w_stored,
            q_training,
            w_training,
            order,
        })
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            q: self.q.iter().map(QPolicy::checkpoint).collect(),
            w: self.w.iter().map(WPolicy::checkpoint).collect(),
            channels: self.channels.clone(),
            w_epsilon: self.w_epsilon,
            steps: self.steps,
        }
    }

    pub fn load_checkpoint(&mut self, ck: &AgentCheckpoint) -> Result<()> {
        if ck.q.len() != self.q.len() || ck.w.len() != self.w.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {} policies, agent has {}",
                ck.q.len(),
                self.q.len()
            )));
        }
        self.load_q_policies(&ck.q)?;
        for (w, c) in self.w.iter_mut().zip(&ck.w) {
            w.load_checkpoint(c)?;
        }
        self.channels = ck.channels.clone();
        self.w_epsilon = ck.w_epsilon;
        self.steps = ck.steps;
        Ok(())
    }

    /// Replaces only the Q side; W-networks stay as they are.
    pub fn load_q_policies(&mut self, q: &[QPolicyCheckpoint]) -> Result<()> {
        if q.len() != self.q.len() {
            return Err(Error::Checkpoint(format!(
                "{} Q checkpoints for {} policies",
                q.len(),
                self.q.len()
            )));
        }
        for (policy, c) in self.q.iter_mut().zip(q) {
            policy.load_checkpoint(c)?;
        }
        Ok(())
    }
}

fn channel(rewards: &RewardVector, c: usize) -> Result<f32> {
    rewards
        .as_slice()
        .get(c)
        .copied()
        .ok_or_else(|| Error::config(format!("reward channel {c} out of range")))
}
