mod common;

use kea::agents::{Agent, RewardScaling, SacAgent, SacConfig};
use kea::env::{DeepSea, DeepSeaConfig, Environment};
use kea::intrinsic::{IntrinsicKind, IntrinsicModel, RndConfig};
use kea::kea::{select_policy, trace_usage, KeaState, PolicyId, SwitchConfig};
use kea::oracle::{eta_ratio, eta_trace, k_star, simulate_crossover, Crossover, CrossoverParams, EtaRatio};
use kea::replay::ReplayBuffer;
use proptest::prelude::*;

use common::rng;

fn deepsea_controller(seed: u64, sigma: f64) -> (KeaState, IntrinsicModel, DeepSea) {
    let env = DeepSea::new(DeepSeaConfig::new(6, Some(seed))).unwrap();
    let cfg = SacConfig {
        hidden: vec![16, 16],
        ..SacConfig::deepsea()
    };
    let n = Agent::Sac(SacAgent::new(36, 2, cfg.clone(), &mut rng(seed)).unwrap());
    let s = Agent::Sac(SacAgent::new(36, 2, cfg, &mut rng(seed + 1)).unwrap());
    let kea = KeaState::new(n, s, SwitchConfig { sigma }).unwrap();
    let model = IntrinsicModel::build(
        IntrinsicKind::Rnd,
        36,
        RndConfig::default(),
        0.5,
        &mut rng(seed + 2),
        &mut rng(seed + 3),
    )
    .unwrap();
    (kea, model, env)
}

/// Records a live run, then replays its signal trace through the switch alone.
#[test]
fn replaying_signal_trace_reproduces_live_choices() {
    let (mut kea, mut model, mut env) = deepsea_controller(3, 1.0);
    let mut buf = ReplayBuffer::new(10_000).unwrap();
    let mut r = rng(9);
    let mut signals = Vec::new();
    let mut chosen = Vec::new();
    for t in 0..600 {
        let out = kea.collect_step(&mut env, &mut model, &mut buf, &mut r).unwrap();
        chosen.push(out.policy);
        signals.push(out.signal);
        if t >= 64 && t % 4 == 0 {
            kea.train_tick(&buf, &model, RewardScaling::new(6.0, 1.0), 32, &mut r).unwrap();
        }
    }
    assert_eq!(chosen[0], PolicyId::N, "the first decision sees the initial zero");
    let mut last = 0.0;
    for (t, &p) in chosen.iter().enumerate() {
        assert_eq!(select_policy(last, kea.switch()).unwrap(), p, "step {t}");
        last = signals[t];
    }
    assert!(chosen.contains(&PolicyId::S), "trace should exercise both agents");
    assert_eq!(trace_usage(&signals, 1.0).unwrap(), kea.usage_fraction().unwrap());
    assert!(kea.usage_s_count() <= kea.step_count());
}

#[test]
fn s_agent_never_sees_intrinsic_reward() {
    let (mut kea, mut model, mut env) = deepsea_controller(5, 0.5);
    // release the gate by hand so that both agents train
    kea.agent_s_mut().unwrap().set_loss_weight(1.0);
    let mut buf = ReplayBuffer::new(1000).unwrap();
    let mut r = rng(1);
    for _ in 0..200 {
        kea.collect_step(&mut env, &mut model, &mut buf, &mut r).unwrap();
    }
    for _ in 0..20 {
        let tick = kea.train_tick(&buf, &model, RewardScaling::new(6.0, 1.0), 32, &mut r).unwrap();
        let s = tick.s.unwrap();
        assert!(s.applied && tick.n.applied);
        assert_eq!(s.intrinsic_total, 0.0);
        assert!(tick.n.intrinsic_total > 0.0);
        assert_eq!(tick.indices.len(), 32);
    }
}

#[test]
fn baseline_never_switches() {
    let env_cfg = DeepSeaConfig::new(5, Some(1));
    let mut env = DeepSea::new(env_cfg).unwrap();
    let agent = Agent::Sac(SacAgent::new(25, 2, SacConfig::deepsea(), &mut rng(0)).unwrap());
    let mut kea = KeaState::baseline(agent);
    let mut model = IntrinsicModel::build(IntrinsicKind::Count, 25, RndConfig::default(), 0.5, &mut rng(1), &mut rng(2))
        .unwrap();
    let mut buf = ReplayBuffer::new(100).unwrap();
    for _ in 0..100 {
        let out = kea.collect_step(&mut env, &mut model, &mut buf, &mut rng(3)).unwrap();
        assert_eq!(out.policy, PolicyId::N);
    }
    assert_eq!(kea.usage_s_count(), 0);
    assert_eq!(env.obs_dim(), 25);
}

#[test]
fn oracle_edge_cases() {
    let p = CrossoverParams::new(1.0, 0.0, 0.3, 0.5).unwrap();
    assert_eq!(simulate_crossover(&p, 100).unwrap(), Crossover::At(2));
    // (1 − γ) ε equal to γ α log 2 and below it
    let g: f64 = 0.5;
    let alpha = 0.2;
    let eps = g * alpha * std::f64::consts::LN_2 / (1.0 - g);
    for e in [eps, eps * 0.5] {
        let p = CrossoverParams::new(1.0, g, alpha, e).unwrap();
        assert_eq!(k_star(&p), Crossover::NoCrossover);
        assert_eq!(simulate_crossover(&p, 5000).unwrap(), Crossover::NoCrossover);
    }
}

/// `exp` via its power series, summed until terms vanish.
fn series_exp(x: f64) -> f64 {
    let (mut term, mut sum) = (1.0, 1.0);
    for n in 1..200 {
        term *= x / n as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

#[test]
fn eta_matches_series_exponential() {
    for (q1, q2, a) in [(0.31, 0.1, 0.3), (1.0, 1.4, 0.2), (0.05, 0.05, 0.01)] {
        let EtaRatio::Ratio(r) = eta_ratio(q1, q2, a).unwrap() else {
            panic!("small gaps stay representable");
        };
        let s = series_exp((q1 - q2) / a);
        assert!((r - s).abs() <= 1e-12 * s, "{r} vs {s}");
    }
    assert!(matches!(eta_ratio(1000.0, 0.0, 0.01).unwrap(), EtaRatio::LogRatio(l) if l == 100_000.0));
}

fn valid_params() -> impl Strategy<Value = CrossoverParams> {
    (0.05f64..5.0, 0.0f64..0.95, 0.001f64..0.3, 0.01f64..2.0)
        .prop_filter_map("needs a positive denominator", |(b, g, a, e)| {
            let p = CrossoverParams::new(b, g, a, e).ok()?;
            let k = k_star(&p).value()?;
            // keep the simulator loop short
            (k < 50_000.0).then_some(p)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn switch_is_a_strict_threshold(r in 0.0f64..5.0, sigma in 0.0f64..5.0) {
        let p = select_policy(r, SwitchConfig { sigma }).unwrap();
        prop_assert_eq!(p == PolicyId::S, r > sigma);
    }

    #[test]
    fn usage_nonincreasing_in_sigma(trace in prop::collection::vec(0.0f64..2.0, 1..300)) {
        let sigmas = [0.5, 0.75, 1.0, 1.25, 1.5];
        let usage: Vec<f64> = sigmas.iter().map(|s| trace_usage(&trace, *s).unwrap()).collect();
        for w in usage.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn simulation_agrees_with_closed_form(p in valid_params()) {
        let k = k_star(&p).value().unwrap();
        let sim = simulate_crossover(&p, k.ceil() as u64 + 10).unwrap().value().unwrap();
        prop_assert!((sim as f64 - k.ceil()).abs() <= 1.0, "k* {} sim {}", k, sim);
    }

    #[test]
    fn k_star_monotone_in_beta_and_eps(p in valid_params(), db in 0.01f64..1.0, de in 0.01f64..1.0) {
        let k = k_star(&p).value().unwrap();
        let more_beta = CrossoverParams::new(p.beta + db, p.gamma, p.alpha, p.eps).unwrap();
        prop_assert!(k_star(&more_beta).value().unwrap() > k);
        let more_eps = CrossoverParams::new(p.beta, p.gamma, p.alpha, p.eps + de).unwrap();
        prop_assert!(k_star(&more_eps).value().unwrap() < k);
    }

    #[test]
    fn eta_decreases_until_crossover(p in valid_params()) {
        let k = k_star(&p).value().unwrap();
        let trace = eta_trace(&p, k.ceil() as u64 + 10).unwrap();
        for w in trace.windows(2) {
            if (w[1].k as f64) < k {
                prop_assert!(w[1].log_eta < w[0].log_eta);
            }
        }
    }
}
