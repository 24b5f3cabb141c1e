use dwn_core::envs::{DeepSeaTreasure, Environment, MountainCar, MountainCarConfig};
use dwn_core::qpolicy::{DqnAgent, EpsilonSchedule, QPolicy, RewardReduction};
use dwn_core::replay::ReplayConfig;
use dwn_core::rng::{stream, Stream};
use dwn_core::wlearning::{select_policy, DwnAgent, DwnConfig};

fn small(k: usize) -> DwnConfig {
    let mut cfg = DwnConfig::default();
    cfg.q.hidden = vec![16];
    cfg.q.dueling_width = 16;
    cfg.q.batch_size = k;
    cfg.q.replay = ReplayConfig::new(4096, 0.6, 0.4);
    cfg.w.hidden = vec![16];
    cfg.w.replay = ReplayConfig::new(4096, 0.6, 0.4);
    cfg
}

fn reset_if_done<E: Environment>(env: &mut E) {
    if env.is_done() {
        env.reset();
    }
}

/// Counts must sit within three binomial standard deviations of `n / bins`.
fn assert_uniform(counts: &[usize]) {
    let n: usize = counts.iter().sum();
    let p = 1.0 / counts.len() as f64;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    for (i, &c) in counts.iter().enumerate() {
        let dev = (c as f64 - n as f64 * p).abs();
        assert!(dev <= 3.0 * sigma, "bin {i}: {c} of {n}");
    }
}

#[test]
fn single_policy_dwn_tracks_dqn_on_deep_sea() {
    let cfg = small(8);
    let mut dwn = DwnAgent::with_channels(vec![1], 110, 4, &cfg, 5).unwrap();
    let mut dqn = DqnAgent::new(110, 4, RewardReduction::Channel(1), &cfg.q, 5).unwrap();
    let mut env_a = DeepSeaTreasure::standard();
    let mut env_b = env_a.clone();
    for _ in 0..300 {
        let a = dwn.step(&mut env_a).unwrap();
        let b = dqn.step(&mut env_b).unwrap();
        assert_eq!(a.winner, 0);
        assert_eq!(a.action, b.action);
        assert_eq!(a.rewards, b.rewards);
        assert_eq!(a.q_training[0].trained(), b.trained);
        assert!(!a.w_training[0].trained());
        reset_if_done(&mut env_a);
        reset_if_done(&mut env_b);
    }
    assert_eq!(dwn.q_policies()[0].online().params(), dqn.policy().online().params());
    assert_eq!(dwn.w_policies()[0].replay().len(), 0);
}

#[test]
fn storage_follows_the_winner() {
    let cfg = small(32);
    let mut agent = DwnAgent::new(3, 2, 3, &cfg, 11).unwrap();
    let mut env = MountainCar::new(MountainCarConfig::default()).unwrap();
    let steps = 400;
    let mut wins = [0usize; 3];
    for _ in 0..steps {
        let r = agent.step(&mut env).unwrap();
        for (i, &stored) in r.w_stored.iter().enumerate() {
            assert_eq!(stored, i != r.winner);
        }
        assert_eq!(r.action, r.nominations[r.winner]);
        wins[r.winner] += 1;
        reset_if_done(&mut env);
    }
    for (i, q) in agent.q_policies().iter().enumerate() {
        assert_eq!(q.replay().len(), steps, "Q buffer {i}");
    }
    for (i, w) in agent.w_policies().iter().enumerate() {
        assert_eq!(w.replay().len(), steps - wins[i], "W buffer {i}");
    }
}

#[test]
fn full_exploration_nominates_uniformly() {
    let mut cfg = small(8).q;
    cfg.epsilon_start = 1.0;
    cfg.epsilon_min = 1.0;
    let mut q = QPolicy::new(0, 2, 3, &cfg, 3).unwrap();
    q.set_epsilon(EpsilonSchedule::constant(1.0).unwrap());
    let mut counts = [0usize; 3];
    for _ in 0..10_000 {
        counts[q.nominate_action(&[0.1, -0.2]).unwrap()] += 1;
    }
    assert_uniform(&counts);
}

#[test]
fn full_w_exploration_selects_uniformly() {
    let mut rng = stream(9, Stream::Selection);
    let w = [5.0, -1.0, 0.5, 2.0];
    let mut counts = [0usize; 4];
    for _ in 0..10_000 {
        counts[select_policy(&w, 1.0, &mut rng).unwrap()] += 1;
    }
    assert_uniform(&counts);
}

#[test]
fn zero_w_tau_freezes_w_targets() {
    let mut cfg = small(16);
    cfg.w.tau = 0.0;
    let mut agent = DwnAgent::new(2, 2, 3, &cfg, 4).unwrap();
    let before: Vec<_> = agent.w_policies().iter().map(|w| w.target().params().clone()).collect();
    let online: Vec<_> = agent.w_policies().iter().map(|w| w.online().params().clone()).collect();
    let mut env = MountainCar::new(MountainCarConfig::default()).unwrap();
    let mut trained = 0;
    for _ in 0..200 {
        let r = agent.step(&mut env).unwrap();
        trained += r.w_training.iter().filter(|o| o.trained()).count();
        reset_if_done(&mut env);
    }
    assert!(trained > 0);
    for (i, w) in agent.w_policies().iter().enumerate() {
        assert_eq!(w.target().params(), &before[i]);
        if agent.w_policies()[i].replay().len() >= 16 {
            assert_ne!(w.online().params(), &online[i]);
        }
    }
}

#[test]
fn identical_seeds_replay_identically() {
    let cfg = small(16);
    let run = |seed: u64| {
        let mut agent = DwnAgent::new(3, 2, 3, &cfg, seed).unwrap();
        let mut env = MountainCar::new(MountainCarConfig::default()).unwrap();
        let mut trace = Vec::new();
        for _ in 0..150 {
            let r = agent.step(&mut env).unwrap();
            trace.push((r.winner, r.action, r.w_values));
            reset_if_done(&mut env);
        }
        (trace, agent.checkpoint())
    };
    let (a, ck_a) = run(21);
    let (b, ck_b) = run(21);
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&ck_a).unwrap(),
        serde_json::to_string(&ck_b).unwrap()
    );
    let (c, _) = run(22);
    assert_ne!(a, c);
}

#[test]
fn checkpoint_restores_agent_outputs() {
    let cfg = small(16);
    let mut agent = DwnAgent::new(2, 2, 3, &cfg, 8).unwrap();
    let mut env = MountainCar::new(MountainCarConfig::default()).unwrap();
    for _ in 0..100 {
        agent.step(&mut env).unwrap();
        reset_if_done(&mut env);
    }
    let ck = agent.checkpoint();
    let mut fresh = DwnAgent::new(2, 2, 3, &cfg, 99).unwrap();
    fresh.load_checkpoint(&ck).unwrap();
    let s = [0.3, -0.1];
    assert_eq!(fresh.w_values(&s).unwrap(), agent.w_values(&s).unwrap());
    for (a, b) in fresh.q_policies().iter().zip(agent.q_policies()) {
        assert_eq!(a.q_values(&s).unwrap(), b.q_values(&s).unwrap());
    }
    assert_eq!(fresh.w_epsilon(), agent.w_epsilon());
}

#[test]
fn mismatched_checkpoint_names_the_layer() {
    let cfg = small(16);
    let agent = DwnAgent::new(2, 2, 3, &cfg, 8).unwrap();
    let mut wider = small(16);
    wider.q.hidden = vec![32];
    let mut other = DwnAgent::new(2, 2, 3, &wider, 8).unwrap();
    let err = other.load_checkpoint(&agent.checkpoint()).unwrap_err().to_string();
    assert!(err.contains("layer"), "{err}");
}
