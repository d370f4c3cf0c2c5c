mod common;

use kea::tensor::{clip_grad_norm, Activation, AdamState, Categorical, Mlp, RunningStats};
use proptest::prelude::*;

use common::{check_architecture, rng};

#[test]
fn tanh_two_layer_gradients_match_finite_differences() {
    let worst = check_architecture(&[4, 6, 3], Activation::Tanh, 10, 11);
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}

#[test]
fn relu_deep_stack_gradients_match_finite_differences() {
    let worst = check_architecture(&[5, 12, 12, 12, 3], Activation::Relu, 10, 12);
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}

#[test]
fn adam_is_bit_reproducible() {
    let run = || {
        let mut r = rng(5);
        let mut net = Mlp::new(&[3, 16, 2], Activation::Relu, &mut r).unwrap();
        let mut adam = AdamState::new(&net);
        let x = common::inputs(3, 8, &mut r);
        for _ in 0..20 {
            let tape = net.forward_tape(x.clone()).unwrap();
            let g = tape.output().clone();
            let (mut grads, _) = net.backward_tape(&tape, &g, false).unwrap();
            clip_grad_norm(&mut grads, 1.0);
            adam.step(&mut net, &grads, 1e-2).unwrap();
        }
        (net, adam.step_count())
    };
    let (a, na) = run();
    let (b, nb) = run();
    assert_eq!(na, 20);
    assert_eq!(na, nb);
    assert_eq!(a.fingerprint(), b.fingerprint());
    assert!(a.params().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn shapes_chain_and_output_is_linear() {
    let net = Mlp::new(&[7, 5, 3], Activation::Relu, &mut rng(3)).unwrap();
    assert_eq!(net.layer_sizes(), vec![7, 5, 3]);
    for w in net.layers().windows(2) {
        assert_eq!(w[0].fan_out(), w[1].fan_in());
    }
    // a large negative bias would be clamped by a final ReLU
    let mut net = net;
    net.layers_mut()[1].bias_mut().iter_mut().for_each(|b| *b = -100.0);
    assert!(net.forward(&[0.1; 7]).unwrap().iter().all(|v| *v < -50.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn categorical_is_normalized_and_shift_invariant(
        logits in prop::collection::vec(-30.0f64..30.0, 1..8),
        shift in -50.0f64..50.0,
    ) {
        let d = Categorical::from_logits(&logits).unwrap();
        prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let e = Categorical::from_logits(&shifted).unwrap();
        for (p, q) in d.probs().iter().zip(e.probs()) {
            prop_assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn running_stats_ignore_order(
        values in prop::collection::vec(-1e3f64..1e3, 1..60),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let a: RunningStats = values.iter().copied().collect();
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut rng(seed));
        let b: RunningStats = shuffled.into_iter().collect();
        prop_assert!((a.mean() - b.mean()).abs() <= 1e-9);
        prop_assert!((a.m2() - b.m2()).abs() <= 1e-9 * a.m2().max(1.0));
        prop_assert!(a.variance() >= 0.0);
    }

    #[test]
    fn merged_stats_equal_concatenated_stream(
        xs in prop::collection::vec(-10.0f64..10.0, 1..30),
        ys in prop::collection::vec(-10.0f64..10.0, 1..30),
    ) {
        let a: RunningStats = xs.iter().copied().collect();
        let b: RunningStats = ys.iter().copied().collect();
        let all: RunningStats = xs.iter().chain(&ys).copied().collect();
        let m = a.merge(&b);
        prop_assert_eq!(m.count(), all.count());
        prop_assert!((m.mean() - all.mean()).abs() <= 1e-10);
        prop_assert!((m.m2() - all.m2()).abs() <= 1e-8);
    }

    #[test]
    fn polyak_is_exact_convex_combination(seed in any::<u64>(), tau in 0.0f64..1.0) {
        let mut r = rng(seed);
        let live = Mlp::new(&[3, 4, 2], Activation::Relu, &mut r).unwrap();
        let mut target = Mlp::new(&[3, 4, 2], Activation::Relu, &mut r).unwrap();
        let old = target.clone();
        target.polyak_update(&live, tau).unwrap();
        for ((t, o), l) in target.params().zip(old.params()).zip(live.params()) {
            prop_assert_eq!(t.to_bits(), (o + tau * (l - o)).to_bits());
        }
    }

    #[test]
    fn batch_forward_equals_row_by_row(seed in any::<u64>(), rows in 1usize..6) {
        let mut r = rng(seed);
        let net = Mlp::new(&[4, 9, 3], Activation::Tanh, &mut r).unwrap();
        let x = common::inputs(4, rows, &mut r);
        let y = net.forward_batch(&x).unwrap();
        for i in 0..rows {
            let single = net.forward(x.row(i)).unwrap();
            for (a, b) in single.iter().zip(y.row(i)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
        prop_assert!(y.as_slice().iter().all(|v| v.is_finite()));
    }
}
