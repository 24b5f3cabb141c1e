//! Single-objective DQN: epsilon-greedy nomination, target-network
//! bootstrapping, prioritized replay and soft target updates.

use ndarray::{Array2, ArrayView1};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envs::{Environment, RewardVector};
use crate::error::{Error, Result};
use crate::neural::{
    soft_update, Head, Network, NetworkCheckpoint, NetworkSpec, OptimizerConfig, OptimizerState,
    DEFAULT_HIDDEN, DUELING_WIDTH,
};
use crate::replay::{PrioritizedReplay, ReplayConfig, SampleBatch, Transition};
use crate::rng::{self, Rng, Stream};

/// Multiplicative epsilon decay with a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    current: f64,
    start: f64,
    decay: f64,
    min: f64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, decay: f64, min: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&min) || min > start {
            return Err(Error::config(format!(
                "epsilon schedule needs 0 <= min <= start <= 1 (start {start}, min {min})"
            )));
        }
        if !(0.0..=1.0).contains(&decay) {
            return Err(Error::config(format!("epsilon decay {decay} outside [0, 1]")));
        }
        Ok(Self {
            current: start,
            start,
            decay,
            min,
        })
    }

    /// A schedule pinned at `value`.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(value, 1.0, value)
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn step(&mut self) {
        self.current = (self.current * self.decay).max(self.min);
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn row_max(row: ArrayView1<'_, f32>) -> f32 {
    row.iter().copied().fold(f32::NEG_INFINITY, f32::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub mean_abs_td: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainOutcome {
    /// Replay held fewer entries than the batch size.
    Skipped,
    Trained(TrainStats),
}

impl TrainOutcome {
    pub fn trained(&self) -> bool {
        matches!(self, TrainOutcome::Trained(_))
    }
}

/// Sampled transitions stacked into matrices.
pub(crate) struct TransitionBatch {
    pub states: Array2<f32>,
    pub next_states: Array2<f32>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f32>,
    pub terminal: Vec<bool>,
}

pub(crate) fn gather(replay: &PrioritizedReplay, indices: &[usize]) -> Result<TransitionBatch> {
    let first = replay
        .get(*indices.first().ok_or_else(|| Error::Internal("empty batch".into()))?)
        .ok_or_else(|| Error::Internal("sampled index out of range".into()))?;
    let dim = first.state.len();
    let k = indices.len();
    let mut states = Array2::zeros((k, dim));
    let mut next_states = Array2::zeros((k, dim));
    let mut actions = Vec::with_capacity(k);
    let mut rewards = Vec::with_capacity(k);
    let mut terminal = Vec::with_capacity(k);
    for (row, &i) in indices.iter().enumerate() {
        let t = replay
            .get(i)
            .ok_or_else(|| Error::Internal(format!("sampled index {i} out of range")))?;
        if t.state.len() != dim || t.next_state.len() != dim {
            return Err(Error::Shape {
                layer: 0,
                expected: dim.to_string(),
                found: t.state.len().to_string(),
            });
        }
        states.row_mut(row).assign(&ArrayView1::from(&t.state[..]));
        next_states.row_mut(row).assign(&ArrayView1::from(&t.next_state[..]));
        actions.push(t.action);
        rewards.push(t.reward);
        terminal.push(t.terminal);
    }
    Ok(TransitionBatch {
        states,
        next_states,
        actions,
        rewards,
        terminal,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QConfig {
    pub hidden: Vec<usize>,
    pub dueling_width: usize,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub replay: ReplayConfig,
    pub optimizer: OptimizerConfig,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    /// Clip TD errors to `[-c, c]` before they enter the gradient.
    pub td_clip: Option<f64>,
}

impl Default for QConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN.to_vec(),
            dueling_width: DUELING_WIDTH,
            gamma: 0.99,
            tau: 1e-3,
            batch_size: 1024,
            replay: ReplayConfig::new(10_000, 0.6, 0.4),
            optimizer: OptimizerConfig::adam(1e-3),
            epsilon_start: 0.95,
            epsilon_decay: 0.995,
            epsilon_min: 0.1,
            td_clip: None,
        }
    }
}

impl QConfig {
    pub fn spec(&self, input_dim: usize, num_actions: usize) -> NetworkSpec {
        NetworkSpec {
            input_dim,
            hidden_dims: self.hidden.clone(),
            head: Head::Dueling {
                width: self.dueling_width,
            },
            output_dim: num_actions,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::config(format!("tau {} outside [0, 1]", self.tau)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be >= 1"));
        }
        self.replay.validate()
    }
}

/// Everything needed to resume a Q-policy, minus its replay contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QPolicyCheckpoint {
    pub online: NetworkCheckpoint<f32>,
    pub target: NetworkCheckpoint<f32>,
    pub epsilon: EpsilonSchedule,
}

#[derive(Debug, Clone)]
pub struct QPolicy {
    id: usize,
    online: Network<f32>,
    target: Network<f32>,
    optimizer: OptimizerState<f32>,
    replay: PrioritizedReplay,
    epsilon: EpsilonSchedule,
    gamma: f32,
    tau: f64,
    batch_size: usize,
    td_clip: Option<f64>,
    rng: Rng,
}

impl QPolicy {
    /// Builds policy `id`; its weights and random streams derive from `seed` and `id`.
    pub fn new(id: usize, input_dim: usize, num_actions: usize, cfg: &QConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.spec(input_dim, num_actions);
        let mut init = rng::stream(seed, Stream::QInit(id));
        let online = Network::new(spec.clone(), &mut init)?;
        let target = online.clone();
        Ok(Self {
            id,
            optimizer: OptimizerState::new(cfg.optimizer, &spec),
            online,
            target,
            replay: PrioritizedReplay::new(cfg.replay)?,
            epsilon: EpsilonSchedule::new(cfg.epsilon_start, cfg.epsilon_decay, cfg.epsilon_min)?,
            gamma: cfg.gamma as f32,
            tau: cfg.tau,
            batch_size: cfg.batch_size,
            td_clip: cfg.td_clip,
            rng: rng::stream(seed, Stream::QPolicy(id)),
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

    pub fn target_mut(&mut self) -> &mut Network<f32> {
        &mut self.target
    }

    pub fn replay(&self) -> &PrioritizedReplay {
        &self.replay
    }

    pub fn epsilon(&self) -> &EpsilonSchedule {
        &self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: EpsilonSchedule) {
        self.epsilon = epsilon;
    }

    pub fn gamma(&self) -> f32 {
        self.gamma
    }

    pub fn num_actions(&self) -> usize {
        self.online.spec().output_dim
    }

    pub fn q_values(&self, state: &[f32]) -> Result<Vec<f32>> {
        self.online.forward(state)
    }

    pub fn greedy_action(&self, state: &[f32]) -> Result<usize> {
        Ok(argmax(&self.q_values(state)?))
    }

    /// Epsilon-greedy action; ties in the greedy branch go to the lowest index.
    pub fn nominate_action(&mut self, state: &[f32]) -> Result<usize> {
        let q = self.q_values(state)?;
        if self.rng.random::<f64>() < self.epsilon.current() {
            Ok(self.rng.random_range(0..q.len()))
        } else {
            Ok(argmax(&q))
        }
    }

    /// `r` at terminal states, else `r + gamma * max_a' Q_target(s', a')`.
    pub fn td_target(&self, reward: f32, next_state: &[f32], terminal: bool) -> Result<f32> {
        if terminal {
            return Ok(reward);
        }
        let next = self.target.forward(next_state)?;
        Ok(reward + self.gamma * next.iter().copied().fold(f32::NEG_INFINITY, f32::max))
    }

    /// Stores the executed action `action` with this policy's reward channel.
    pub fn record_transition(
        &mut self,
        state: &[f32],
        action: usize,
        reward: f32,
        next_state: &[f32],
        terminal: bool,
    ) {
        self.replay.store(Transition {
            state: state.to_vec(),
            action,
            reward,
            next_state: next_state.to_vec(),
            terminal,
        });
    }

    /// One prioritized minibatch update, followed by a soft target update
    /// and an epsilon decay. Skipped while replay holds fewer than `K` entries.
    pub fn train_step(&mut self) -> Result<TrainOutcome> {
        let Some(batch) = self.replay.sample(self.batch_size, &mut self.rng) else {
            return Ok(TrainOutcome::Skipped);
        };
        self.train_on_batch(&batch)
    }

    /// Training update on an explicit sample (exposed for tests).
    pub fn train_on_batch(&mut self, sample: &SampleBatch) -> Result<TrainOutcome> {
        let tb = gather(&self.replay, &sample.indices)?;
        let k = sample.len();
        let n_act = self.num_actions();
        let next_q = self.target.forward_batch(tb.next_states.view())?;
        let cache = self.online.forward_cached(tb.states.view())?;

        let mut out_grad = Array2::<f32>::zeros((k, n_act));
        let mut deltas = Vec::with_capacity(k);
        let mut loss = 0.0f64;
        let mut abs_sum = 0.0f64;
        let scale = 1.0 / k as f64;
        for i in 0..k {
            let a = tb.actions[i];
            if a >= n_act {
                return Err(Error::Internal(format!("stored action {a} out of range")));
            }
            let mut y = tb.rewards[i];
            if !tb.terminal[i] {
                y += self.gamma * row_max(next_q.row(i));
            }
            let delta = (y - cache.output[[i, a]]) as f64;
            let used = match self.td_clip {
                Some(c) => delta.clamp(-c, c),
                None => delta,
            };
            let w = sample.weights[i];
            out_grad[[i, a]] = (-w * used * scale) as f32;
            loss += 0.5 * w * used * used * scale;
            abs_sum += delta.abs();
            deltas.push(delta);
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                what: "Q loss",
                layer: self.online.params().layers.len() - 1,
            });
        }
        let grads = self.online.backward(&cache, out_grad.view())?;
        self.optimizer.apply(self.online.params_mut(), &grads)?;
        self.replay.update_priorities(&sample.indices, &deltas)?;
        soft_update(self.target.params_mut(), self.online.params(), self.tau)?;
        self.epsilon.step();
        Ok(TrainOutcome::Trained(TrainStats {
            mean_abs_td: abs_sum * scale,
            loss,
        }))
    }

    pub fn checkpoint(&self) -> QPolicyCheckpoint {
        QPolicyCheckpoint {
            online: NetworkCheckpoint::of(&self.online, Some(&self.optimizer)),
            target: NetworkCheckpoint::of(&self.target, None),
            epsilon: self.epsilon,
        }
    }

    /// Replaces networks, optimizer state and epsilon; replay is kept.
    pub fn load_checkpoint(&mut self, ck: &QPolicyCheckpoint) -> Result<()> {
        let spec = self.online.spec().clone();
        let online = ck.online.restore(&spec, &format!("q{}.online", self.id))?;
        let target = ck.target.restore(&spec, &format!("q{}.target", self.id))?;
        if let Some(opt) = &ck.online.optimizer {
            self.optimizer = opt.clone();
        }
        self.online = online;
        self.target = target;
        self.epsilon = ck.epsilon;
        Ok(())
    }
}

/// How a reward vector is collapsed into a single DQN reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardReduction {
    Sum,
    Channel(usize),
}

impl RewardReduction {
    pub fn apply(&self, rewards: &RewardVector) -> Result<f32> {
        match *self {
            RewardReduction::Sum => Ok(rewards.sum()),
            RewardReduction::Channel(c) => rewards
                .as_slice()
                .get(c)
                .copied()
                .ok_or_else(|| Error::config(format!("reward channel {c} out of range"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnStepRecord {
    pub state: Vec<f32>,
    pub action: usize,
    pub rewards: RewardVector,
    pub reward: f32,
    pub next_state: Vec<f32>,
    pub terminal: bool,
    pub truncated: bool,
    pub trained: bool,
}

/// A single DQN acting on a scalarized reward.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    policy: QPolicy,
    reduction: RewardReduction,
}

impl DqnAgent {
    pub fn new(
        input_dim: usize,
        num_actions: usize,
        reduction: RewardReduction,
        cfg: &QConfig,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            policy: QPolicy::new(0, input_dim, num_actions, cfg, seed)?,
            reduction,
        })
    }

    pub fn policy(&self) -> &QPolicy {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut QPolicy {
        &mut self.policy
    }

    pub fn reduction(&self) -> RewardReduction {
        self.reduction
    }

    pub fn step<E: Environment>(&mut self, env: &mut E) -> Result<DqnStepRecord> {
        if env.is_done() {
            return Err(Error::EpisodeState("step on finished episode".into()));
        }
        let state = env.observe();
        let action = self.policy.nominate_action(&state)?;
        let outcome = env.step(action)?;
        let next_state = env.observe();
        let reward = self.reduction.apply(&outcome.rewards)?;
        self.policy
            .record_transition(&state, action, reward, &next_state, outcome.terminal);
        let trained = self.policy.train_step()?.trained();
        Ok(DqnStepRecord {
            state,
            action,
            rewards: outcome.rewards,
            reward,
            next_state,
            terminal: outcome.terminal,
            truncated: outcome.truncated,
            trained,
        })
    }
}
