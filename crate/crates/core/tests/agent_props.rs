mod common;

use kea::agents::{ActMode, Agent, QAgent, QConfig, QTarget, RewardScaling, SacAgent, SacConfig};
use kea::kea::PolicyId;
use kea::replay::{Batch, Transition};
use kea::tensor::{Categorical, Matrix, Mlp};
use proptest::prelude::*;
use rand::Rng;

use common::{rel_err, rng};

fn small_sac(seed: u64, alpha: f64) -> SacAgent {
    let cfg = SacConfig {
        hidden: vec![8, 8],
        alpha,
        ..SacConfig::default()
    };
    SacAgent::new(3, 2, cfg, &mut rng(seed)).unwrap()
}

fn random_batch(seed: u64, n: usize, obs_dim: usize, actions: usize) -> Batch {
    let mut r = rng(seed);
    let rows: Vec<Transition> = (0..n)
        .map(|_| Transition {
            obs: (0..obs_dim).map(|_| r.random_range(0.0..1.0)).collect(),
            action: r.random_range(0..actions),
            reward_ext: if r.random_bool(0.2) { 1.0 } else { 0.0 },
            next_obs: (0..obs_dim).map(|_| r.random_range(0.0..1.0)).collect(),
            terminated: r.random_bool(0.2),
            truncated: r.random_bool(0.1),
            behavior: PolicyId::N,
            first_visit: true,
        })
        .collect();
    let refs: Vec<&Transition> = rows.iter().collect();
    Batch::from_transitions(&refs).unwrap()
}

fn r_int(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed ^ 0xabcd);
    (0..n).map(|_| r.random_range(0.0..1.0)).collect()
}

fn flat(net: &Mlp) -> Vec<f64> {
    net.params().copied().collect()
}

#[test]
fn critic_step_reduces_its_loss() {
    let mut agent = small_sac(1, 0.3);
    let batch = random_batch(2, 32, 3, 2);
    let ri = r_int(2, 32);
    let scaling = RewardScaling::new(1.0, 1.0);
    let y = agent.targets(&batch, &ri, scaling).unwrap();
    let before = [agent.critic_loss(0, &batch, &y).unwrap(), agent.critic_loss(1, &batch, &y).unwrap()];
    agent.update_with(&batch, &ri, scaling).unwrap();
    let after = [agent.critic_loss(0, &batch, &y).unwrap(), agent.critic_loss(1, &batch, &y).unwrap()];
    assert!(after[0] < before[0], "{before:?} -> {after:?}");
    assert!(after[1] < before[1], "{before:?} -> {after:?}");
}

/// Two one-hot states, two actions: the analytic actor gradient against
/// central differences of the actor objective.
#[test]
fn actor_gradient_matches_finite_differences() {
    const H: f64 = 1e-5;
    for seed in 0..5 {
        let cfg = SacConfig {
            hidden: vec![6],
            ..SacConfig::default()
        };
        let mut agent = SacAgent::new(2, 2, cfg, &mut rng(seed)).unwrap();
        let obs = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let (_, grads) = agent.actor_loss_and_grad(&obs).unwrap();
        let analytic = flat(&grads);
        for (k, g) in analytic.iter().enumerate() {
            let base = *agent.policy().params().nth(k).unwrap();
            *agent.policy_mut().params_mut().nth(k).unwrap() = base + H;
            let up = agent.actor_loss_and_grad(&obs).unwrap().0;
            *agent.policy_mut().params_mut().nth(k).unwrap() = base - H;
            let down = agent.actor_loss_and_grad(&obs).unwrap().0;
            *agent.policy_mut().params_mut().nth(k).unwrap() = base;
            let fd = (up - down) / (2.0 * H);
            assert!(rel_err(*g, fd) < 1e-4, "seed {seed} param {k}: {g} vs {fd}");
        }
    }
}

/// With a vanishing temperature the actor follows the plain policy gradient
/// of `−E_π[min Q]`.
#[test]
fn actor_gradient_tends_to_greedy_policy_gradient() {
    let agent = small_sac(7, 1e-8);
    let obs = Matrix::from_rows(&[[0.2, 0.7, 0.1], [0.9, 0.3, 0.5]]).unwrap();
    let (_, grads) = agent.actor_loss_and_grad(&obs).unwrap();

    let [q1, q2] = agent.critics();
    let q1 = q1.forward_batch(&obs).unwrap();
    let q2 = q2.forward_batch(&obs).unwrap();
    let tape = agent.policy().forward_tape(obs.clone()).unwrap();
    let mut dz = Matrix::zeros(2, 2);
    for b in 0..2 {
        let p = Categorical::from_logits(tape.output().row(b)).unwrap();
        let m: Vec<f64> = (0..2).map(|a| q1.get(b, a).min(q2.get(b, a))).collect();
        let mean: f64 = p.probs().iter().zip(&m).map(|(p, q)| p * q).sum();
        for a in 0..2 {
            dz.set(b, a, -p.probs()[a] * (m[a] - mean) / 2.0);
        }
    }
    let (pg, _) = agent.policy().backward_tape(&tape, &dz, false).unwrap();
    let (a, b) = (flat(&grads), flat(&pg));
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let cos = dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt());
    assert!(cos > 1.0 - 1e-3, "cosine {cos}");
}

#[test]
fn q_agents_follow_polyak_and_freeze() {
    for target in [QTarget::Dqn, QTarget::Sql] {
        let cfg = QConfig {
            hidden: vec![8],
            target,
            ..QConfig::default()
        };
        let mut agent = QAgent::new(3, 2, cfg, &mut rng(3)).unwrap();
        let batch = random_batch(4, 16, 3, 2);
        let old = agent.q_target().clone();
        agent.update_with(&batch, &r_int(4, 16), RewardScaling::default()).unwrap();
        for ((t, o), l) in agent.q_target().params().zip(old.params()).zip(agent.q().params()) {
            assert_eq!(t.to_bits(), (o + 0.005 * (l - o)).to_bits());
        }
        agent.set_loss_weight(0.0);
        let fp = agent.fingerprint();
        for _ in 0..50 {
            assert!(!agent.update_with(&batch, &r_int(5, 16), RewardScaling::default()).unwrap().applied);
        }
        assert_eq!(agent.fingerprint(), fp);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sac_targets_follow_polyak_exactly(seed in any::<u64>()) {
        let mut agent = small_sac(seed, 0.3);
        let batch = random_batch(seed, 16, 3, 2);
        let old: Vec<Mlp> = agent.target_critics().iter().map(|m| (*m).clone()).collect();
        agent.update_with(&batch, &r_int(seed, 16), RewardScaling::new(100.0, 1.0)).unwrap();
        let tau = agent.config().tau;
        for k in 0..2 {
            let live = agent.critics()[k];
            let tgt = agent.target_critics()[k];
            for ((t, o), l) in tgt.params().zip(old[k].params()).zip(live.params()) {
                prop_assert_eq!(t.to_bits(), (o + tau * (l - o)).to_bits());
            }
        }
    }

    #[test]
    fn frozen_agent_checksum_constant(seed in any::<u64>(), updates in 1usize..30) {
        let mut agent = Agent::Sac(small_sac(seed, 0.3));
        agent.set_loss_weight(0.0);
        let fp = agent.fingerprint();
        for i in 0..updates {
            let batch = random_batch(seed.wrapping_add(i as u64), 8, 3, 2);
            let l = agent.update_with(&batch, &r_int(seed, 8), RewardScaling::default()).unwrap();
            prop_assert!(!l.applied);
        }
        prop_assert_eq!(agent.fingerprint(), fp);
        prop_assert_eq!(agent.update_count(), 0);
    }

    #[test]
    fn sac_targets_commute_with_batch_permutation(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let agent = small_sac(seed, 0.3);
        let mut r = rng(seed);
        let rows: Vec<Transition> = (0..12)
            .map(|_| Transition {
                obs: (0..3).map(|_| r.random_range(0.0..1.0)).collect(),
                action: r.random_range(0..2),
                reward_ext: r.random_range(0.0..1.0),
                next_obs: (0..3).map(|_| r.random_range(0.0..1.0)).collect(),
                terminated: r.random_bool(0.3),
                truncated: false,
                behavior: PolicyId::N,
                first_visit: true,
            })
            .collect();
        let ri = r_int(seed, 12);
        let mut perm: Vec<usize> = (0..12).collect();
        perm.shuffle(&mut r);
        let refs: Vec<&Transition> = rows.iter().collect();
        let prefs: Vec<&Transition> = perm.iter().map(|&i| &rows[i]).collect();
        let pri: Vec<f64> = perm.iter().map(|&i| ri[i]).collect();
        let scaling = RewardScaling::new(100.0, 1.0);
        let y = agent.targets(&Batch::from_transitions(&refs).unwrap(), &ri, scaling).unwrap();
        let py = agent.targets(&Batch::from_transitions(&prefs).unwrap(), &pri, scaling).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            prop_assert!((py[j] - y[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn greedy_action_is_mode(seed in any::<u64>()) {
        let agent = small_sac(seed, 0.3);
        let obs = [0.3, 0.1, 0.8];
        let d = agent.distribution(&obs).unwrap();
        prop_assert_eq!(agent.act(&obs, ActMode::Greedy, &mut rng(0)).unwrap(), d.mode());
    }
}
