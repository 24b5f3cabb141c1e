//! Training-free invariant checks, runnable from the command line.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::{dst_pareto_oracle, DstLayout, Environment, MountainCar, MountainCarConfig, ParetoPoint};
use crate::neural::{soft_update, Network, NetworkSpec};
use crate::qpolicy::{DqnAgent, RewardReduction};
use crate::replay::{PrioritizedReplay, ReplayConfig, Transition};
use crate::rng::{self, Stream};
use crate::wlearning::{select_policy, DwnAgent, DwnConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<String, String>;

const SUITES: [(&str, Check); 8] = [
    ("gradient_finite_difference", gradient_fd),
    ("per_distribution", per_distribution),
    ("soft_update_geometric", soft_update_geometric),
    ("dueling_mean_zero", dueling_mean_zero),
    ("winner_exclusion", winner_exclusion),
    ("argmax_shift_invariance", shift_invariance),
    ("single_policy_equals_dqn", single_policy_equals_dqn),
    ("deep_sea_oracle", deep_sea_oracle),
];

pub fn run_all() -> Vec<SuiteResult> {
    SUITES
        .iter()
        .map(|(name, check)| {
            let (passed, detail) = match check() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            SuiteResult { name, passed, detail }
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gradient_fd() -> Result<String, String> {
    let spec = NetworkSpec {
        input_dim: 2,
        hidden_dims: vec![4],
        head: crate::neural::Head::Dueling { width: 4 },
        output_dim: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = Network::<f64>::new(spec, &mut rng).map_err(|e| e.to_string())?;
    let x = [0.3, -0.7];
    let cot = [0.5, -1.0, 2.0];
    let loss = |n: &Network<f64>| -> f64 {
        n.forward(&x).unwrap().iter().zip(cot).map(|(q, c)| q * c).sum()
    };
    let grads = net.backward_single(&x, &cot).map_err(|e| e.to_string())?;
    let analytic = grads.flatten();
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut index = 0;
    for (l, layer) in net.params().layers.iter().enumerate() {
        let n_w = layer.weight.len();
        for k in 0..n_w + layer.bias.len() {
            let bump = |delta: f64| {
                let mut n = net.clone();
                let target = &mut n.params_mut().layers[l];
                if k < n_w {
                    let (r, c) = (k / target.weight.ncols(), k % target.weight.ncols());
                    target.weight[[r, c]] += delta;
                } else {
                    target.bias[k - n_w] += delta;
                }
                loss(&n)
            };
            let numeric = (bump(h) - bump(-h)) / (2.0 * h);
            let a = analytic[index];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
            index += 1;
        }
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:.3e}"))?;
    Ok(format!("{index} parameters, max relative error {worst:.2e}"))
}

fn transition(k: usize) -> Transition {
    Transition {
        state: vec![k as f32],
        action: 0,
        reward: 0.0,
        next_state: vec![k as f32],
        terminal: false,
    }
}

fn per_distribution() -> Result<String, String> {
    let mut buf = PrioritizedReplay::new(ReplayConfig::new(8, 0.6, 0.4)).map_err(|e| e.to_string())?;
    for k in 0..5 {
        buf.store(transition(k));
    }
    buf.update_priorities(&[0, 1, 2, 3, 4], &[0.1, 0.5, 1.0, 2.0, 4.0])
        .map_err(|e| e.to_string())?;
    let total: f64 = (0..5).map(|i| buf.probability(i)).sum();
    ensure((total - 1.0).abs() < 1e-9, || format!("probabilities sum to {total}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 100_000;
    let mut counts = [0usize; 5];
    for _ in 0..draws / 5 {
        for i in buf.sample(5, &mut rng).expect("enough entries").indices {
            counts[i] += 1;
        }
    }
    for (i, &c) in counts.iter().enumerate() {
        let p = buf.probability(i);
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let dev = (c as f64 - draws as f64 * p).abs();
        ensure(dev <= 3.0 * sigma, || format!("entry {i}: {c} draws, expected {:.0}", draws as f64 * p))?;
    }

    let mut flat = PrioritizedReplay::new(ReplayConfig::new(8, 0.0, 0.4)).map_err(|e| e.to_string())?;
    for k in 0..4 {
        flat.store(transition(k));
    }
    flat.update_priorities(&[0, 1], &[9.0, 0.01]).map_err(|e| e.to_string())?;
    for i in 0..4 {
        let p = flat.probability(i);
        ensure((p - 0.25).abs() < 1e-12, || format!("zeta=0 gives P({i}) = {p}"))?;
    }
    Ok(format!("{draws} draws within 3 sigma"))
}

fn soft_update_geometric() -> Result<String, String> {
    let spec = NetworkSpec::w_network(3, &[5]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let online = Network::<f64>::new(spec.clone(), &mut rng).map_err(|e| e.to_string())?;
    let mut target = Network::<f64>::new(spec, &mut rng).map_err(|e| e.to_string())?;
    let gap0: Vec<f64> = diff(&target, &online);
    let tau = 0.1;
    let k = 20;
    for _ in 0..k {
        soft_update(target.params_mut(), online.params(), tau).map_err(|e| e.to_string())?;
    }
    let factor = (1.0 - tau).powi(k);
    let worst = diff(&target, &online)
        .iter()
        .zip(&gap0)
        .map(|(g, g0)| (g - g0 * factor).abs())
        .fold(0.0, f64::max);
    ensure(worst < 1e-12, || format!("deviation from (1-tau)^k scaling {worst:.3e}"))?;
    Ok(format!("max deviation {worst:.1e} after {k} updates"))
}

fn diff(a: &Network<f64>, b: &Network<f64>) -> Vec<f64> {
    a.params()
        .flatten()
        .iter()
        .zip(b.params().flatten())
        .map(|(x, y)| x - y)
        .collect()
}

fn dueling_mean_zero() -> Result<String, String> {
    let spec = NetworkSpec::q_network(2, 4, &[6]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let net = Network::<f64>::new(spec, &mut rng).map_err(|e| e.to_string())?;
    let mut zeroed = net.clone();
    let last = zeroed.params().layers.len() - 1;
    // Q with the value row removed is pure mean-centred advantage.
    zeroed.params_mut().layers[last].weight.row_mut(0).fill(0.0);
    zeroed.params_mut().layers[last].bias[0] = 0.0;
    for _ in 0..50 {
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let q = zeroed.forward(&x).map_err(|e| e.to_string())?;
        let mean = q.iter().sum::<f64>() / q.len() as f64;
        ensure(mean.abs() < 1e-12, || format!("advantage mean {mean:.3e}"))?;
    }
    Ok("50 probe states".into())
}

fn small_dwn(k: usize) -> DwnConfig {
    let mut cfg = DwnConfig::default();
    cfg.q.hidden = vec![16];
    cfg.q.dueling_width = 16;
    cfg.q.batch_size = k;
    cfg.q.replay = ReplayConfig::new(512, 0.6, 0.4);
    cfg.w.hidden = vec![16];
    cfg.w.replay = ReplayConfig::new(512, 0.6, 0.4);
    cfg
}

fn winner_exclusion() -> Result<String, String> {
    let mut agent = DwnAgent::new(3, 2, 3, &small_dwn(16), 21).map_err(|e| e.to_string())?;
    let mut env = MountainCar::new(MountainCarConfig::default()).map_err(|e| e.to_string())?;
    let steps = 300;
    for t in 0..steps {
        let before: Vec<usize> = agent.w_policies().iter().map(|w| w.replay().len()).collect();
        let rec = agent.step(&mut env).map_err(|e| e.to_string())?;
        for (i, w) in agent.w_policies().iter().enumerate() {
            let grew = w.replay().len() - before[i];
            let expect = usize::from(i != rec.winner);
            ensure(grew == expect, || format!("step {t}: W buffer {i} grew by {grew}, winner {}", rec.winner))?;
        }
        if env.is_done() {
            env.reset();
        }
    }
    Ok(format!("{steps} steps"))
}

fn shift_invariance() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = NetworkSpec::q_network(2, 3, &[8]);
    let net = Network::<f32>::new(spec, &mut rng).map_err(|e| e.to_string())?;
    let mut shifted = net.clone();
    let last = shifted.params().layers.len() - 1;
    shifted.params_mut().layers[last].bias[0] += 0.75;
    for _ in 0..200 {
        let x = [rng.random_range(-1.0f32..1.0), rng.random_range(-1.0f32..1.0)];
        let a = crate::qpolicy::argmax(&net.forward(&x).map_err(|e| e.to_string())?);
        let b = crate::qpolicy::argmax(&shifted.forward(&x).map_err(|e| e.to_string())?);
        ensure(a == b, || format!("nomination changed under shift at {x:?}"))?;
    }
    let mut sel = rng::stream(0, Stream::Selection);
    for _ in 0..200 {
        let w: Vec<f32> = (0..4).map(|_| rng.random_range(-2.0f32..2.0)).collect();
        let c = rng.random_range(-5.0f32..5.0);
        let shifted: Vec<f32> = w.iter().map(|v| v + c).collect();
        let a = select_policy(&w, 0.0, &mut sel).map_err(|e| e.to_string())?;
        let b = select_policy(&shifted, 0.0, &mut sel).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("selection changed under shift {c} for {w:?}"))?;
    }
    Ok("200 nominations, 200 selections".into())
}

fn single_policy_equals_dqn() -> Result<String, String> {
    let cfg = small_dwn(16);
    let seed = 17;
    let mut dwn = DwnAgent::new(1, 2, 3, &cfg, seed).map_err(|e| e.to_string())?;
    let mut dqn = DqnAgent::new(2, 3, RewardReduction::Channel(0), &cfg.q, seed).map_err(|e| e.to_string())?;
    let mut env_a = MountainCar::new(MountainCarConfig::default()).map_err(|e| e.to_string())?;
    let mut env_b = env_a.clone();
    let steps = 400;
    for t in 0..steps {
        let a = dwn.step(&mut env_a).map_err(|e| e.to_string())?;
        let b = dqn.step(&mut env_b).map_err(|e| e.to_string())?;
        ensure(a.action == b.action && a.next_state == b.next_state, || {
            format!("trajectories diverge at step {t}")
        })?;
        for env in [&mut env_a, &mut env_b] {
            if env.is_done() {
                env.reset();
            }
        }
    }
    ensure(dwn.q_policies()[0].online().params() == dqn.policy().online().params(), || {
        "final Q parameters differ".into()
    })?;
    Ok(format!("{steps} identical steps"))
}

fn deep_sea_oracle() -> Result<String, String> {
    let front = dst_pareto_oracle(&DstLayout::standard());
    ensure(front.len() == 10, || format!("{} front points", front.len()))?;
    for p in [ParetoPoint::new(-1.0, 1.0), ParetoPoint::new(-19.0, 124.0)] {
        ensure(front.contains(&p), || format!("missing {p:?}"))?;
    }
    Ok("10 points".into())
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_suites_pass() {
        for r in super::run_all() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
