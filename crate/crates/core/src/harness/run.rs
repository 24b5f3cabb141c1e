use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{load_layout, Agent, AnyEnv, EnvId, ExperimentConfig, RunCheckpoint, AgentKind};
use crate::envs::{DstLayout, Environment};
use crate::error::{Error, Result};
use crate::exec;
use crate::neural::{load_container, save_container};
use crate::qpolicy::QPolicyCheckpoint;

/// Episodes averaged in the per-seed summary.
const SUMMARY_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    /// Reached the goal or a treasure (as opposed to hitting the step cap).
    pub terminal: bool,
    /// Undiscounted return per reward channel.
    pub rewards: Vec<f64>,
    /// Steps won by each policy (DWN only, else empty).
    pub selections: Vec<usize>,
    pub duration_ms: f64,
}

impl EpisodeRecord {
    /// Equality on everything except wall-clock time.
    pub fn same_outcome(&self, other: &EpisodeRecord) -> bool {
        self.episode == other.episode
            && self.steps == other.steps
            && self.terminal == other.terminal
            && self.selections == other.selections
            && self.rewards.len() == other.rewards.len()
            && self
                .rewards
                .iter()
                .zip(&other.rewards)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// One seed's episodes, final state and failure, if any.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
    pub checkpoint: Option<RunCheckpoint>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes: usize,
    pub failure: Option<String>,
    /// Episodes in the final window below.
    pub window: usize,
    pub mean_steps: f64,
    pub goal_fraction: f64,
    pub mean_rewards: Vec<f64>,
    pub selection_fractions: Vec<f64>,
}

impl SeedSummary {
    pub fn of(run: &SeedRun) -> Self {
        let tail = &run.records[run.records.len().saturating_sub(SUMMARY_WINDOW)..];
        let n = tail.len().max(1) as f64;
        let channels = tail.first().map_or(0, |r| r.rewards.len());
        let policies = tail.first().map_or(0, |r| r.selections.len());
        let steps: usize = tail.iter().map(|r| r.steps).sum();
        Self {
            seed: run.seed,
            episodes: run.records.len(),
            failure: run.failure.clone(),
            window: tail.len(),
            mean_steps: steps as f64 / n,
            goal_fraction: tail.iter().filter(|r| r.terminal).count() as f64 / n,
            mean_rewards: (0..channels)
                .map(|c| tail.iter().map(|r| r.rewards[c]).sum::<f64>() / n)
                .collect(),
            selection_fractions: (0..policies)
                .map(|i| {
                    let won: usize = tail.iter().map(|r| r.selections[i]).sum();
                    won as f64 / steps.max(1) as f64
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunSummary {
    env: String,
    agent: String,
    episodes: usize,
    seeds: Vec<SeedSummary>,
    /// Mean and sample standard deviation across seeds of each channel's final-window return.
    mean_rewards: Vec<(f64, f64)>,
}

/// Runs one seed from a fresh agent (loading `pretrained_q` if configured).
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    let layout = shared_layout(cfg)?;
    run_seed_in(cfg, seed, layout)
}

fn run_seed_in(cfg: &ExperimentConfig, seed: u64, layout: Option<Arc<DstLayout>>) -> Result<SeedRun> {
    cfg.validate()?;
    let env = AnyEnv::build(cfg, layout)?;
    let mut agent = Agent::build(cfg, &env, seed)?;
    if !cfg.pretrained_q.is_empty() {
        let ckpts = cfg
            .pretrained_q
            .iter()
            .map(|p| load_q_checkpoint(p))
            .collect::<Result<Vec<_>>>()?;
        if let Agent::Dwn(a) = &mut agent {
            a.load_q_policies(&ckpts)?;
        }
    }
    Ok(run_seed_with(cfg, seed, agent, env))
}

/// Q-policy checkpoint from a DQN run's final checkpoint file.
pub(crate) fn load_q_checkpoint(path: &Path) -> Result<QPolicyCheckpoint> {
    match load_container::<RunCheckpoint>(path)? {
        RunCheckpoint::Dqn(q) => Ok(q),
        RunCheckpoint::Dwn(_) => Err(Error::Checkpoint(format!(
            "{} holds a DWN agent, expected a single Q-policy",
            path.display()
        ))),
    }
}

/// Runs `cfg.episodes` episodes with a prepared agent and environment.
///
/// A numerical failure stops the run; episodes completed so far are kept.
pub fn run_seed_with(cfg: &ExperimentConfig, seed: u64, mut agent: Agent, mut env: AnyEnv) -> SeedRun {
    let mut records = Vec::with_capacity(cfg.episodes);
    let mut failure = None;
    for episode in 0..cfg.episodes {
        match run_episode(&mut agent, &mut env, episode) {
            Ok(rec) => {
                log::debug!(
                    "seed {seed} episode {episode}: {} steps, rewards {:?}",
                    rec.steps,
                    rec.rewards
                );
                records.push(rec);
            }
            Err(e) => {
                log::error!("seed {seed} failed in episode {episode}: {e}");
                failure = Some(format!("episode {episode}: {e}"));
                break;
            }
        }
        if (episode + 1) % 50 == 0 {
            log::info!("seed {seed}: {} / {} episodes", episode + 1, cfg.episodes);
        }
    }
    SeedRun {
        seed,
        checkpoint: failure.is_none().then(|| agent.checkpoint()),
        records,
        failure,
    }
}

fn run_episode(agent: &mut Agent, env: &mut AnyEnv, episode: usize) -> Result<EpisodeRecord> {
    let start = Instant::now();
    env.reset();
    let mut rewards = vec![0.0f64; env.num_objectives()];
    let mut selections = vec![0usize; agent.num_policies()];
    let mut terminal = false;
    let mut steps = 0;
    while !env.is_done() {
        let s = agent.step(env)?;
        for (acc, r) in rewards.iter_mut().zip(&s.rewards) {
            *acc += *r as f64;
        }
        if let Some(j) = s.winner {
            selections[j] += 1;
        }
        steps += 1;
        terminal = s.terminal;
    }
    Ok(EpisodeRecord {
        episode,
        steps,
        terminal,
        rewards,
        selections,
        duration_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn shared_layout(cfg: &ExperimentConfig) -> Result<Option<Arc<DstLayout>>> {
    Ok(match cfg.env {
        EnvId::DeepSea => Some(Arc::new(load_layout(cfg)?)),
        EnvId::MountainCar => None,
    })
}

/// Runs every seed and writes a run directory at `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SeedSummary>> {
    cfg.validate()?;
    let layout = shared_layout(cfg)?;
    let runs = exec::map(&cfg.seeds, |&seed| run_seed_in(cfg, seed, layout.clone()))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    write_run(cfg, &runs, out)
}

/// Writes `config.resolved`, `episodes.csv`, `summary.json`, checkpoints and a failure marker.
pub(crate) fn write_run(cfg: &ExperimentConfig, runs: &[SeedRun], out: &Path) -> Result<Vec<SeedSummary>> {
    let ckpt_dir = out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    let resolved = out.join("config.resolved");
    fs::write(&resolved, cfg.to_text()).map_err(|e| Error::io(&resolved, e))?;
    write_episodes(cfg, runs, &out.join("episodes.csv"))?;

    let mut failures = String::new();
    for run in runs {
        match (&run.checkpoint, &run.failure) {
            (Some(ck), _) => save_container(&ckpt_dir.join(format!("seed-{}.json", run.seed)), ck)?,
            (None, Some(msg)) => failures.push_str(&format!("seed {}: {msg}\n", run.seed)),
            (None, None) => {}
        }
    }
    let marker = out.join("FAILED");
    if failures.is_empty() {
        if marker.exists() {
            fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
        }
    } else {
        fs::write(&marker, failures).map_err(|e| Error::io(&marker, e))?;
    }

    let seeds: Vec<SeedSummary> = runs.iter().map(SeedSummary::of).collect();
    let channels = seeds.iter().map(|s| s.mean_rewards.len()).max().unwrap_or(0);
    let mean_rewards = (0..channels)
        .map(|c| {
            let xs: Vec<f64> = seeds.iter().filter_map(|s| s.mean_rewards.get(c).copied()).collect();
            mean_sd(&xs)
        })
        .collect();
    let summary = RunSummary {
        env: cfg.env.to_string(),
        agent: cfg.agent.to_string(),
        episodes: cfg.episodes,
        seeds: seeds.clone(),
        mean_rewards,
    };
    let path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(seeds)
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub(crate) fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn write_episodes(cfg: &ExperimentConfig, runs: &[SeedRun], path: &Path) -> Result<()> {
    let channels = cfg.env.num_objectives();
    let policies = if cfg.agent == AgentKind::Dwn { channels } else { 0 };
    let w = cfg.env.rolling_window();
    let mut header = vec!["seed".to_string(), "episode".into(), "steps".into(), "terminal".into()];
    header.extend((0..channels).map(|c| format!("reward_{c}")));
    header.extend((0..policies).map(|i| format!("selected_{i}")));
    header.push(format!("mean{w}_steps"));
    header.extend((0..channels).map(|c| format!("mean{w}_reward_{c}")));
    header.push("duration_ms".into());

    let mut out = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Internal(format!("{other:?}")),
    })?;
    out.write_record(&header)?;
    for run in runs {
        for (i, rec) in run.records.iter().enumerate() {
            let window = &run.records[(i + 1).saturating_sub(w)..=i];
            let n = window.len() as f64;
            let mut row = vec![
                run.seed.to_string(),
                rec.episode.to_string(),
                rec.steps.to_string(),
                rec.terminal.to_string(),
            ];
            row.extend(rec.rewards.iter().map(f64::to_string));
            row.extend(rec.selections.iter().map(usize::to_string));
            row.push((window.iter().map(|r| r.steps as f64).sum::<f64>() / n).to_string());
            row.extend(
                (0..channels).map(|c| (window.iter().map(|r| r.rewards[c]).sum::<f64>() / n).to_string()),
            );
            row.push(format!("{:.3}", rec.duration_ms));
            out.write_record(&row)?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Both phases of the pretraining protocol for one seed.
#[derive(Debug, Clone)]
pub struct PretrainRun {
    /// One single-channel DQN run per objective.
    pub phase1: Vec<SeedRun>,
    pub phase2: SeedRun,
}

fn phase1_config(cfg: &ExperimentConfig, channel: usize) -> ExperimentConfig {
    ExperimentConfig {
        agent: AgentKind::DqnSingle(channel),
        episodes: cfg.pretrain_episodes,
        pretrained_q: Vec::new(),
        ..cfg.clone()
    }
}

fn phase2_config(cfg: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        agent: AgentKind::Dwn,
        pretrained_q: Vec::new(),
        ..cfg.clone()
    }
}

/// Trains each channel's DQN alone, then loads the Q-policies into a fresh
/// DWN agent (new W-networks) and keeps training for `cfg.episodes`.
pub fn pretrain_seed(cfg: &ExperimentConfig, seed: u64) -> Result<PretrainRun> {
    let layout = shared_layout(cfg)?;
    pretrain_seed_in(cfg, seed, layout)
}

fn pretrain_seed_in(cfg: &ExperimentConfig, seed: u64, layout: Option<Arc<DstLayout>>) -> Result<PretrainRun> {
    let phase1 = (0..cfg.env.num_objectives())
        .map(|c| run_seed_in(&phase1_config(cfg, c), seed, layout.clone()))
        .collect::<Result<Vec<_>>>()?;
    let p2 = phase2_config(cfg);
    p2.validate()?;
    let mut q = Vec::with_capacity(phase1.len());
    for run in &phase1 {
        match &run.checkpoint {
            Some(RunCheckpoint::Dqn(ck)) => q.push(ck.clone()),
            _ => {
                return Ok(PretrainRun {
                    phase2: SeedRun {
                        seed,
                        records: Vec::new(),
                        checkpoint: None,
                        failure: Some("pretraining did not complete".into()),
                    },
                    phase1,
                })
            }
        }
    }
    let env = AnyEnv::build(&p2, layout)?;
    let mut agent = Agent::build(&p2, &env, seed)?;
    if let Agent::Dwn(a) = &mut agent {
        a.load_q_policies(&q)?;
    }
    let phase2 = run_seed_with(&p2, seed, agent, env);
    Ok(PretrainRun { phase1, phase2 })
}

/// Runs the two-phase protocol for every seed; writes `phase1/channel-<c>/` and `phase2/`.
pub fn pretrain_then_transfer(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SeedSummary>> {
    cfg.validate()?;
    let layout = shared_layout(cfg)?;
    let runs = exec::map(&cfg.seeds, |&seed| pretrain_seed_in(cfg, seed, layout.clone()))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let resolved = out.join("config.resolved");
    fs::write(&resolved, cfg.to_text()).map_err(|e| Error::io(&resolved, e))?;
    for c in 0..cfg.env.num_objectives() {
        let phase: Vec<SeedRun> = runs.iter().map(|r| r.phase1[c].clone()).collect();
        write_run(&phase1_config(cfg, c), &phase, &out.join("phase1").join(format!("channel-{c}")))?;
    }
    let phase2: Vec<SeedRun> = runs.into_iter().map(|r| r.phase2).collect();
    write_run(&phase2_config(cfg), &phase2, &out.join("phase2"))
}
