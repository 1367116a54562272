use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ric_core::rl::*;
use ric_core::Error;

fn exp(state: Vec<f64>, action: usize, reward: f64, next: Vec<f64>, terminal: bool) -> Experience {
    Experience { state, action, reward, next_state: next, terminal, next_mask: None }
}

/// Straight-line re-evaluation of an MLP, independent of the engine's code path.
fn reference_forward(net: &QNetwork, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for (k, l) in net.layers.iter().enumerate() {
        let mut z = vec![0.0; l.outputs];
        for o in 0..l.outputs {
            z[o] = l.bias[o];
            for i in 0..l.inputs {
                z[o] += l.weights[o * l.inputs + i] * a[i];
            }
            if k + 1 < net.layers.len() && z[o] < 0.0 {
                z[o] = 0.0;
            }
        }
        a = z;
    }
    a
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn zero_network_outputs_zero() {
    let net = QNetwork::zeros(&[4, 8, 3]).unwrap();
    assert_eq!(net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
}

#[test]
fn identity_layer_is_identity() {
    let mut net = QNetwork::zeros(&[3, 3]).unwrap();
    for i in 0..3 {
        net.layers[0].weights[i * 3 + i] = 1.0;
    }
    let s = [0.3, -1.5, 2.0];
    assert_eq!(net.forward(&s).unwrap(), s.to_vec());
}

#[test]
fn forward_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let net = QNetwork::new(&[6, 10, 7, 4], &mut rng).unwrap();
        let s = random_state(&mut rng, 6);
        let q = net.forward(&s).unwrap();
        let r = reference_forward(&net, &s);
        assert_eq!(q.len(), 4);
        for (a, b) in q.iter().zip(&r) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}

#[test]
fn forward_rejects_wrong_dimension() {
    let net = QNetwork::zeros(&[3, 2]).unwrap();
    assert!(matches!(net.forward(&[1.0]), Err(Error::Domain(_))));
}

#[test]
fn gamma_zero_terminal_targets_are_rewards() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut net = QNetwork::new(&[2, 4, 2], &mut rng).unwrap();
    let target = net.clone();
    let batch = [exp(vec![0.5, 0.1], 1, 3.0, vec![0.0, 0.0], true)];
    let refs: Vec<&Experience> = batch.iter().collect();
    let q = net.forward(&batch[0].state).unwrap()[1];
    let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.0, &net);
    let loss = train_step(&mut net, &target, &refs, 0.0, &mut opt).unwrap();
    assert!((loss - (q - 3.0).powi(2)).abs() < 1e-12);
}

#[test]
fn non_terminal_target_uses_discounted_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut net = QNetwork::new(&[2, 4, 3], &mut rng).unwrap();
    let target = QNetwork::new(&[2, 4, 3], &mut rng).unwrap();
    let e = exp(vec![0.2, -0.4], 0, 1.0, vec![0.7, 0.3], false);
    let qn = target.forward(&e.next_state).unwrap();
    let y = 1.0 + 0.3 * qn.iter().cloned().fold(f64::MIN, f64::max);
    let q = net.forward(&e.state).unwrap()[0];
    let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.0, &net);
    let loss = train_step(&mut net, &target, &[&e], 0.3, &mut opt).unwrap();
    assert!((loss - (q - y).powi(2)).abs() < 1e-12);
}

#[test]
fn one_point_regression_converges_monotonically() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut net = QNetwork::new(&[4, 16, 3], &mut rng).unwrap();
    let target = net.clone();
    let e = exp(vec![0.3, -0.2, 0.8, 0.1], 2, 1.5, vec![0.0; 4], true);
    let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.02, &net);
    let mut prev = f64::INFINITY;
    let mut last = f64::INFINITY;
    for _ in 0..2000 {
        last = train_step(&mut net, &target, &[&e], 0.3, &mut opt).unwrap();
        assert!(last <= prev + 1e-15, "loss rose from {prev} to {last}");
        prev = last;
        if last < 1e-6 {
            break;
        }
    }
    assert!(last < 1e-3, "final loss {last}");
}

#[test]
fn non_finite_step_is_rejected_and_weights_kept() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut net = QNetwork::new(&[2, 3, 2], &mut rng).unwrap();
    let target = net.clone();
    let before = net.clone();
    let e = exp(vec![0.1, 0.2], 0, f64::NAN, vec![0.0, 0.0], true);
    let mut opt = Optimizer::new(OptimizerKind::Adam, 1e-3, &net);
    assert!(matches!(train_step(&mut net, &target, &[&e], 0.3, &mut opt), Err(Error::NonFinite(_))));
    assert_eq!(net, before);
}

#[test]
fn empty_batch_is_an_error() {
    let mut net = QNetwork::zeros(&[2, 2]).unwrap();
    let target = net.clone();
    let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &net);
    assert!(train_step(&mut net, &target, &[], 0.3, &mut opt).is_err());
}

fn finite_difference_check(seed: u64, sizes: &[usize], batch: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = QNetwork::new(sizes, &mut rng).unwrap();
    // Nonzero biases keep pre-activations off the ReLU kink at exactly 0.
    for l in &mut net.layers {
        for b in &mut l.bias {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let states: Vec<Vec<f64>> = (0..batch).map(|_| random_state(&mut rng, sizes[0])).collect();
    let actions: Vec<usize> = (0..batch).map(|_| rng.random_range(0..*sizes.last().unwrap())).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect();
    let srefs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
    let (_, grads) = net.loss_and_gradients(&srefs, &actions, &targets).unwrap();
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (k, g) in analytic.iter().enumerate() {
        let mut plus = net.clone();
        *plus.params_mut().nth(k).unwrap() += h;
        let mut minus = net.clone();
        *minus.params_mut().nth(k).unwrap() -= h;
        let lp = plus.loss_and_gradients(&srefs, &actions, &targets).unwrap().0;
        let lm = minus.loss_and_gradients(&srefs, &actions, &targets).unwrap().0;
        let numeric = (lp - lm) / (2.0 * h);
        let err = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(err);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>(), i in 1usize..5, h1 in 2usize..7, h2 in 2usize..6, o in 1usize..5, b in 1usize..4) {
        let worst = finite_difference_check(seed, &[i, h1, h2, o], b);
        prop_assert!(worst <= 1e-4, "relative error {}", worst);
    }

    #[test]
    fn greedy_choice_is_scale_invariant(q in proptest::collection::vec(-10.0f64..10.0, 1..8), c in 0.01f64..100.0) {
        let scaled: Vec<f64> = q.iter().map(|v| v * c).collect();
        prop_assert_eq!(masked_argmax(&q, None), masked_argmax(&scaled, None));
    }

    #[test]
    fn masked_choice_is_always_valid(seed in any::<u64>(), eps in 0.0f64..=1.0, bits in 1u8..128) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = QNetwork::new(&[3, 5, 7], &mut rng).unwrap();
        let mask: Vec<bool> = (0..7).map(|i| bits & (1 << i) != 0).collect();
        let a = select_action(&net, &[0.1, 0.2, 0.3], eps, Some(&mask), &mut rng).unwrap();
        prop_assert!(mask[a]);
    }
}

#[test]
fn epsilon_zero_is_greedy_with_low_index_ties() {
    let mut net = QNetwork::zeros(&[1, 4]).unwrap();
    net.layers[0].bias = vec![0.5, 2.0, 2.0, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        assert_eq!(select_action(&net, &[0.0], 0.0, None, &mut rng).unwrap(), 1);
    }
    let mask = [true, false, true, true];
    assert_eq!(select_action(&net, &[0.0], 0.0, Some(&mask), &mut rng).unwrap(), 2);
}

#[test]
fn epsilon_one_is_uniform() {
    let net = QNetwork::zeros(&[1, 5]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 10_000;
    let mut counts = [0usize; 5];
    for _ in 0..n {
        counts[select_action(&net, &[0.0], 1.0, None, &mut rng).unwrap()] += 1;
    }
    let p = 0.2;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "{counts:?}");
    }
    // chi-square with 4 dof, 99.9% quantile is 18.47
    let chi: f64 = counts.iter().map(|c| (*c as f64 - 2000.0).powi(2) / 2000.0).sum();
    assert!(chi < 18.47, "chi-square {chi}");
}

#[test]
fn all_masked_is_an_error() {
    let net = QNetwork::zeros(&[1, 2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(select_action(&net, &[0.0], 0.0, Some(&[false, false]), &mut rng).is_err());
    assert!(select_action(&net, &[0.0], 1.0, Some(&[false, false]), &mut rng).is_err());
}

#[test]
fn replay_ring_evicts_oldest() {
    let mut buf = ReplayBuffer::new(2);
    for r in 0..3 {
        buf.push(exp(vec![], 0, r as f64, vec![], true));
    }
    let rewards: Vec<f64> = buf.iter().map(|e| e.reward).collect();
    assert_eq!(buf.len(), 2);
    assert!(!rewards.contains(&0.0));
}

#[test]
fn full_sample_is_a_permutation() {
    let mut buf = ReplayBuffer::new(10);
    for r in 0..7 {
        buf.push(exp(vec![], 0, r as f64, vec![], true));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut got: Vec<f64> = buf.sample(7, &mut rng).unwrap().iter().map(|e| e.reward).collect();
    got.sort_by(f64::total_cmp);
    assert_eq!(got, (0..7).map(|r| r as f64).collect::<Vec<_>>());
}

#[test]
fn empty_replay_sampling_fails() {
    let buf = ReplayBuffer::new(3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(buf.sample(1, &mut rng), Err(Error::EmptyBuffer)));
}

#[test]
fn replay_sampling_is_uniform() {
    let mut buf = ReplayBuffer::new(10);
    for r in 0..10 {
        buf.push(exp(vec![], 0, r as f64, vec![], true));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 10_000;
    let mut counts = [0usize; 10];
    for _ in 0..n {
        counts[buf.sample(1, &mut rng).unwrap()[0].reward as usize] += 1;
    }
    let sigma = (n as f64 * 0.1 * 0.9).sqrt();
    for c in counts {
        assert!((c as f64 - 1000.0).abs() <= 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let net = QNetwork::new(&[5, 9, 4], &mut rng).unwrap();
    let back = QNetwork::from_text(&net.to_text()).unwrap();
    assert_eq!(net.sizes(), back.sizes());
    for (a, b) in net.params().zip(back.params()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.txt");
    let sched = TrainSchedule::from_config(&Default::default());
    let mut agent = DqnAgent::new(&[5, 9, 4], sched.clone(), 3).unwrap();
    agent.set_network(net.clone()).unwrap();
    agent.save(&path).unwrap();
    let loaded = DqnAgent::load(&path, sched, 0).unwrap();
    assert_eq!(loaded.online, net);
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    assert!(matches!(QNetwork::from_text("nonsense"), Err(Error::Checkpoint(_))));
    assert!(QNetwork::from_text("qnetwork v1\nsizes 2 1\nw 1.0\nb 0.0\n").is_err());
}

#[test]
fn schedule_decays_and_stays_positive() {
    let s = TrainSchedule::from_config(&Default::default());
    assert_eq!(s.epsilon(0), 0.95);
    assert!((s.epsilon(1) - 0.95 * 0.7).abs() < 1e-15);
    for e in 0..200 {
        let v = s.epsilon(e);
        assert!(v > 0.0 && v <= 1.0);
        assert!(v <= s.epsilon(e.saturating_sub(1)));
    }
}

#[test]
fn same_seed_same_agent_trajectory() {
    let run = || {
        let mut sched = TrainSchedule::from_config(&Default::default());
        sched.batch_size = 8;
        let mut agent = DqnAgent::new(&[3, 8, 4], sched, 77).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut actions = Vec::new();
        for _ in 0..200 {
            let s = random_state(&mut rng, 3);
            let a = agent.act(&s, 0.3, None).unwrap();
            actions.push(a);
            let next = random_state(&mut rng, 3);
            agent.remember(exp(s, a, a as f64 * 0.1, next, false));
            agent.learn().unwrap();
        }
        (actions, agent.online)
    };
    let (a1, n1) = run();
    let (a2, n2) = run();
    assert_eq!(a1, a2);
    assert_eq!(n1, n2);
}
