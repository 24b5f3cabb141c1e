use dwn_core::replay::{PrioritizedReplay, ReplayConfig, Transition};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tr(k: usize) -> Transition {
    Transition {
        state: vec![k as f32],
        action: k % 3,
        reward: k as f32,
        next_state: vec![k as f32 + 1.0],
        terminal: false,
    }
}

fn filled(cap: usize, n: usize, zeta: f64, beta: f64) -> PrioritizedReplay {
    let mut b = PrioritizedReplay::new(ReplayConfig::new(cap, zeta, beta)).unwrap();
    for k in 0..n {
        b.store(tr(k));
    }
    b
}

#[test]
fn empirical_frequencies_within_three_sigma() {
    let mut b = filled(8, 4, 0.6, 0.4);
    b.update_priorities(&[0, 1, 2, 3], &[1.0, 2.0, 3.0, 4.0]).unwrap();
    let expect: Vec<f64> = {
        let w: Vec<f64> = [1.0f64, 2.0, 3.0, 4.0].iter().map(|d| (d + 1e-5).powf(0.6)).collect();
        let z: f64 = w.iter().sum();
        w.iter().map(|x| x / z).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut counts = [0usize; 4];
    let rounds = 25_000;
    for _ in 0..rounds {
        for i in b.sample(4, &mut rng).unwrap().indices {
            counts[i] += 1;
        }
    }
    let n = (rounds * 4) as f64;
    for i in 0..4 {
        let sigma = (n * expect[i] * (1.0 - expect[i])).sqrt();
        assert!(
            (counts[i] as f64 - n * expect[i]).abs() <= 3.0 * sigma,
            "entry {i}: {} vs {:.0}",
            counts[i],
            n * expect[i]
        );
    }
}

#[test]
fn importance_weights_match_closed_form() {
    let mut b = filled(8, 5, 0.6, 0.4);
    b.update_priorities(&[0, 4], &[3.0, 0.2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let batch = b.sample(5, &mut rng).unwrap();
    let raw: Vec<f64> = batch
        .probabilities
        .iter()
        .map(|p| (5.0 * p).powf(-0.4))
        .collect();
    let max = raw.iter().copied().fold(0.0, f64::max);
    for (w, r) in batch.weights.iter().zip(&raw) {
        assert!((w - r / max).abs() < 1e-12);
    }
}

#[test]
fn ring_overwrites_oldest() {
    let b = filled(3, 5, 0.6, 0.4);
    assert_eq!(b.len(), 3);
    let rewards: Vec<f32> = b.iter_fifo().map(|t| t.reward).collect();
    assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_sum_to_one(
        n in 1usize..40,
        zeta in 0.0f64..1.0,
        deltas in prop::collection::vec(-100.0f64..100.0, 40),
    ) {
        let mut b = filled(64, n, zeta, 0.4);
        let idx: Vec<usize> = (0..n).collect();
        b.update_priorities(&idx, &deltas[..n]).unwrap();
        let total: f64 = idx.iter().map(|&i| b.probability(i)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for &i in &idx {
            prop_assert!(b.priority(i).unwrap() >= b.config().priority_floor);
        }
    }

    #[test]
    fn zeta_zero_is_uniform(n in 1usize..30, deltas in prop::collection::vec(0.0f64..50.0, 30)) {
        let mut b = filled(32, n, 0.0, 0.4);
        let idx: Vec<usize> = (0..n).collect();
        b.update_priorities(&idx, &deltas[..n]).unwrap();
        for &i in &idx {
            prop_assert!((b.probability(i) - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_are_valid(n in 1usize..50, k in 1usize..50, seed in 0u64..1000) {
        let mut b = filled(64, n, 0.6, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match b.sample(k, &mut rng) {
            None => prop_assert!(k > n),
            Some(batch) => {
                prop_assert!(k <= n);
                prop_assert_eq!(batch.len(), k);
                prop_assert!(batch.indices.iter().all(|&i| i < n));
                let max = batch.weights.iter().copied().fold(0.0, f64::max);
                prop_assert!((max - 1.0).abs() < 1e-12);
                prop_assert!(batch.weights.iter().all(|&w| w > 0.0 && w <= 1.0));
            }
        }
    }

    #[test]
    fn new_entries_get_max_priority(updates in prop::collection::vec(0.0f64..20.0, 1..10)) {
        let mut b = filled(64, updates.len(), 0.6, 0.4);
        let idx: Vec<usize> = (0..updates.len()).collect();
        b.update_priorities(&idx, &updates).unwrap();
        let slot = b.store(tr(99));
        prop_assert_eq!(b.priority(slot).unwrap(), b.max_priority());
        prop_assert!(b.max_priority() >= 1.0);
    }
}
