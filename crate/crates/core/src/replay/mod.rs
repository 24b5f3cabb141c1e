//! Prioritized experience replay.
//!
//! Entries are sampled with probability `p_i^zeta / sum_k p_k^zeta`, where
//! `p_i` is the magnitude of the entry's last TD error. New entries get the
//! largest priority seen so far, so every experience is replayed at least
//! with high probability once. Importance weights `(n * P(i))^-beta` are
//! normalized by the batch maximum.

mod sum_tree;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use sum_tree::SumTree;

use crate::error::{Error, Result};

/// One experience tuple as stored for a single objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f32>,
    pub action: usize,
    pub reward: f32,
    pub next_state: Vec<f32>,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub zeta: f64,
    pub beta: f64,
    /// Added to `|delta|` so zero-error entries stay reachable.
    pub priority_floor: f64,
    /// When non-zero, beta grows linearly to 1 over this many sampled batches.
    pub beta_anneal_batches: u64,
}

impl ReplayConfig {
    pub fn new(capacity: usize, zeta: f64, beta: f64) -> Self {
        Self {
            capacity,
            zeta,
            beta,
            priority_floor: 1e-5,
            beta_anneal_batches: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::config("replay capacity must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(Error::config(format!("zeta {} outside [0, 1]", self.zeta)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config(format!("beta {} outside [0, 1]", self.beta)));
        }
        if self.priority_floor <= 0.0 {
            return Err(Error::config("priority floor must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct PrioritizedReplay {
    config: ReplayConfig,
    entries: Vec<Transition>,
    /// Raw priorities `p_i`.
    priorities: Vec<f64>,
    /// `p_i^zeta`, indexed like `entries`.
    tree: SumTree,
    /// Slot the next store overwrites once the buffer is full.
    cursor: usize,
    max_priority: f64,
    batches_sampled: u64,
}

impl PrioritizedReplay {
    pub fn new(config: ReplayConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            entries: Vec::new(),
            priorities: Vec::new(),
            tree: SumTree::new(config.capacity),
            cursor: 0,
            max_priority: 1.0,
            batches_sampled: 0,
        })
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.entries.get(index)
    }

    pub fn priority(&self, index: usize) -> Option<f64> {
        self.priorities.get(index).copied()
    }

    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    /// Entries from oldest to newest.
    pub fn iter_fifo(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.entries.len() < self.config.capacity {
            0
        } else {
            self.cursor
        };
        self.entries[split..].iter().chain(&self.entries[..split])
    }

    /// Stores `t` with the largest priority seen so far and returns its slot.
    pub fn store(&mut self, t: Transition) -> usize {
        let p = self.max_priority;
        let slot = if self.entries.len() < self.config.capacity {
            self.entries.push(t);
            self.priorities.push(p);
            self.entries.len() - 1
        } else {
            let slot = self.cursor;
            self.entries[slot] = t;
            self.priorities[slot] = p;
            self.cursor = (self.cursor + 1) % self.config.capacity;
            slot
        };
        self.tree.set(slot, p.powf(self.config.zeta));
        slot
    }

    /// Sampling probability of the entry in `index`.
    pub fn probability(&self, index: usize) -> f64 {
        self.tree.get(index) / self.tree.total()
    }

    pub fn current_beta(&self) -> f64 {
        let cfg = &self.config;
        if cfg.beta_anneal_batches == 0 {
            return cfg.beta;
        }
        let frac = (self.batches_sampled as f64 / cfg.beta_anneal_batches as f64).min(1.0);
        cfg.beta + frac * (1.0 - cfg.beta)
    }

    /// Draws `k` entries with replacement. `None` while fewer than `k` are stored.
    pub fn sample<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) -> Option<SampleBatch> {
        if k == 0 || self.entries.len() < k {
            return None;
        }
        let total = self.tree.total();
        let n = self.entries.len() as f64;
        let beta = self.current_beta();
        let mut indices = Vec::with_capacity(k);
        let mut probabilities = Vec::with_capacity(k);
        let mut weights = Vec::with_capacity(k);
        for _ in 0..k {
            let mass = rng.random::<f64>() * total;
            let idx = self.tree.find(mass).min(self.entries.len() - 1);
            let p = self.tree.get(idx) / total;
            indices.push(idx);
            probabilities.push(p);
            weights.push((n * p).powf(-beta));
        }
        let max_w = weights.iter().copied().fold(f64::MIN, f64::max);
        for w in &mut weights {
            *w /= max_w;
        }
        self.batches_sampled += 1;
        Some(SampleBatch {
            indices,
            weights,
            probabilities,
        })
    }

    /// Sets `p_k = |delta_k| + floor` for each sampled slot.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<()> {
        if indices.len() != td_errors.len() {
            return Err(Error::Internal(format!(
                "{} indices but {} TD errors",
                indices.len(),
                td_errors.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.entries.len()) {
            return Err(Error::Internal(format!(
                "replay index {bad} out of range ({} entries)",
                self.entries.len()
            )));
        }
        for (&i, &delta) in indices.iter().zip(td_errors) {
            let p = delta.abs() + self.config.priority_floor;
            if !p.is_finite() {
                return Err(Error::NonFinite {
                    what: "TD error",
                    layer: 0,
                });
            }
            self.priorities[i] = p;
            self.max_priority = self.max_priority.max(p);
            self.tree.set(i, p.powf(self.config.zeta));
        }
        Ok(())
    }
}
