use dwn_core::envs::{DeepSeaTreasure, Environment};
use dwn_core::harness::{
    load_episodes, pretrain_seed, run_experiment, run_seed, AgentKind, EnvId, ExperimentConfig, RunCheckpoint,
};
use dwn_core::qpolicy::{DqnAgent, RewardReduction};

fn tiny(env: EnvId) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(env);
    c.hidden = vec![8];
    c.dueling_width = 8;
    c.batch_size = 8;
    c.memory_size = 256;
    c.episodes = 4;
    c.seeds = vec![3, 4];
    c.step_cap = 60;
    c.pretrain_episodes = 2;
    c
}

fn q_params(ck: &RunCheckpoint) -> Vec<Vec<f32>> {
    match ck {
        RunCheckpoint::Dqn(q) => vec![q.online.params.flatten()],
        RunCheckpoint::Dwn(a) => a.q.iter().map(|q| q.online.params.flatten()).collect(),
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    for env in [EnvId::MountainCar, EnvId::DeepSea] {
        let cfg = tiny(env);
        let a = run_seed(&cfg, 7).unwrap();
        let b = run_seed(&cfg, 7).unwrap();
        assert_eq!(a.records.len(), cfg.episodes);
        for (x, y) in a.records.iter().zip(&b.records) {
            assert!(x.same_outcome(y), "{env}: {x:?} vs {y:?}");
        }
        assert_eq!(
            serde_json::to_string(&a.checkpoint).unwrap(),
            serde_json::to_string(&b.checkpoint).unwrap()
        );
    }
}

#[test]
fn experiment_matches_individual_seeds() {
    let cfg = tiny(EnvId::DeepSea);
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&cfg, dir.path()).unwrap();
    let loaded = load_episodes(&dir.path().join("episodes.csv")).unwrap();
    assert_eq!(loaded.keys().copied().collect::<Vec<_>>(), cfg.seeds);
    for &seed in &cfg.seeds {
        let solo = run_seed(&cfg, seed).unwrap();
        let from_csv = &loaded[&seed];
        assert_eq!(from_csv.len(), solo.records.len());
        for (x, y) in from_csv.iter().zip(&solo.records) {
            assert!(x.same_outcome(y), "seed {seed}: {x:?} vs {y:?}");
        }
    }
    for name in ["config.resolved", "summary.json", "checkpoints/seed-3.json", "checkpoints/seed-4.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    assert!(!dir.path().join("FAILED").exists());
    let resolved = ExperimentConfig::load(&dir.path().join("config.resolved")).unwrap();
    assert_eq!(resolved, cfg);
}

#[test]
fn summed_reward_agent_learns_from_channel_sum() {
    let cfg = tiny(EnvId::DeepSea);
    let mut agent = DqnAgent::new(110, 4, RewardReduction::Sum, &cfg.q_config(), 1).unwrap();
    let mut env = DeepSeaTreasure::standard();
    for _ in 0..200 {
        let r = agent.step(&mut env).unwrap();
        assert_eq!(r.reward, r.rewards.0.iter().sum::<f32>());
        let stored = agent.policy().replay().iter_fifo().last().unwrap();
        assert_eq!(stored.reward, r.reward);
        if env.is_done() {
            env.reset();
        }
    }
}

#[test]
fn transfer_starts_from_pretrained_policies() {
    let mut cfg = tiny(EnvId::DeepSea);
    cfg.episodes = 0;
    let run = pretrain_seed(&cfg, 5).unwrap();
    assert_eq!(run.phase1.len(), 2);
    for (c, p1) in run.phase1.iter().enumerate() {
        assert_eq!(p1.records.len(), cfg.pretrain_episodes, "channel {c}");
    }
    let loaded = q_params(run.phase2.checkpoint.as_ref().unwrap());
    for (c, p1) in run.phase1.iter().enumerate() {
        assert_eq!(loaded[c], q_params(p1.checkpoint.as_ref().unwrap())[0], "channel {c}");
    }
}

#[test]
fn pretrained_checkpoint_files_are_loaded() {
    let base = tiny(EnvId::DeepSea);
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    let mut expected = Vec::new();
    for c in 0..2 {
        let mut cfg = base.clone();
        cfg.agent = AgentKind::DqnSingle(c);
        cfg.seeds = vec![3];
        let out = dir.path().join(format!("channel-{c}"));
        run_experiment(&cfg, &out).unwrap();
        let path = out.join("checkpoints/seed-3.json");
        expected.push(q_params(&run_seed(&cfg, 3).unwrap().checkpoint.unwrap())[0].clone());
        paths.push(path);
    }
    let mut dwn = base.clone();
    dwn.episodes = 0;
    dwn.pretrained_q = paths.clone();
    let run = run_seed(&dwn, 3).unwrap();
    assert_eq!(q_params(run.checkpoint.as_ref().unwrap()), expected);

    let mut wider = dwn.clone();
    wider.hidden = vec![16];
    let err = run_seed(&wider, 3).unwrap_err().to_string();
    assert!(err.contains("layer"), "{err}");

    let mut short = dwn;
    short.pretrained_q = vec![paths[0].clone()];
    assert!(run_seed(&short, 3).is_err());
}
