use genv2v_core::channel::{self, ChannelParams, FadingMode, LinkGeometry};
use genv2v_core::env::{Env, EnvConfig, LinkAction};
use proptest::prelude::*;

/// One link, one sub-channel, unit fading, no shadowing, and a noise power
/// picked so the received SNR is exactly 1 (rate = 1 Mbit/s).
fn unit_case(payload: f64) -> EnvConfig {
    let distance = 150.0;
    let mut channel = ChannelParams {
        num_subchannels: 1,
        shadowing_sigma_db: 0.0,
        ..Default::default()
    };
    channel.noise_power = 10f64.powf(-channel::path_loss_db(distance, &channel).unwrap() / 10.0);
    let mut cfg = EnvConfig {
        num_links: 1,
        power_levels: vec![1.0],
        power_budget: 1.0,
        diffusion_levels: vec![5],
        fading: FadingMode::Unit,
        channel,
        geometry: LinkGeometry::uniform(1, distance, distance, 0.2),
        ..Default::default()
    };
    cfg.content = cfg.content.with_payload(payload);
    cfg.content.semantic_scale_bits = 0.0;
    cfg.qoe.similarity_ref = genv2v_core::content::similarity(5, &cfg.content);
    cfg
}

#[test]
fn unit_scenario_reward_is_two_ln_two() {
    let mut env = Env::new(unit_case(10_000.0)).unwrap();
    env.reset(0).unwrap();
    let r = env.step(&[0]).unwrap();
    assert!(r.info.success[0]);
    assert!((r.info.rate[0] - 1.0e6).abs() < 1e-6);
    assert!((r.reward - 2.0 * 2f64.ln()).abs() < 1e-9, "{}", r.reward);
    assert!((r.reward - 1.3863).abs() < 1e-4);
}

#[test]
fn failure_scenario_reward_is_the_penalty() {
    // capacity is 1 Mbit/s x 45 ms = 45 kbit
    let cfg = unit_case(100_000.0);
    let (lambda, eps, window) = (cfg.penalty_weight, cfg.qoe.outage_cap, cfg.qoe.outage_window);
    let mut env = Env::new(cfg).unwrap();
    env.reset(0).unwrap();
    for slot in 1..=10 {
        let r = env.step(&[0]).unwrap();
        assert!(!r.info.success[0]);
        let outage = slot as f64 / window as f64;
        assert_eq!(r.info.outage[0], outage);
        let expected = -lambda * (outage - eps).max(0.0);
        assert!((r.reward - expected).abs() < 1e-12, "slot {slot}: {} vs {expected}", r.reward);
    }
}

fn symmetric_pair() -> EnvConfig {
    let mut cfg = EnvConfig {
        num_links: 2,
        fading: FadingMode::Unit,
        penalty_weight: 0.0,
        geometry: LinkGeometry::uniform(2, 2000.0, 200.0, 0.2),
        ..Default::default()
    };
    cfg.channel.num_subchannels = 2;
    cfg.channel.shadowing_sigma_db = 0.0;
    cfg
}

#[test]
fn separate_subchannels_beat_a_shared_one() {
    let env = Env::new(symmetric_pair()).unwrap();
    let space = env.space();
    let a = |c| {
        space
            .encode(LinkAction {
                subchannel: c,
                power: space.num_powers - 1,
                diffusion: 0,
            })
            .unwrap()
    };
    let shared = env.evaluate(&[a(0), a(0)]).unwrap().reward;
    let separate = env.evaluate(&[a(0), a(1)]).unwrap().reward;
    assert!(separate > shared, "{separate} <= {shared}");
}

#[test]
fn resets_are_deterministic_and_clear_state() {
    let mut env = Env::new(EnvConfig::default()).unwrap();
    let first = env.reset(9).unwrap();
    env.step(&[1, 2, 3]).unwrap();
    env.step(&[1, 2, 3]).unwrap();
    let again = env.reset(9).unwrap();
    assert_eq!(first, again);
    assert!(again.iter().all(|o| o.previous_action(64).is_none()));
    assert!((0..3).all(|k| env.tracker().failures(k) == 0));
    let other = env.reset(10).unwrap();
    assert_ne!(first, other);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reward_decomposes_into_qoe_and_penalty(seed in 0u64..1000, actions in prop::collection::vec(prop::collection::vec(0usize..64, 3), 1..30)) {
        let mut env = Env::new(EnvConfig::default()).unwrap();
        env.reset(seed).unwrap();
        for a in &actions {
            let r = env.step(a).unwrap();
            let cfg = env.config();
            let qoe: f64 = r.info.qoe.iter().sum();
            let penalty: f64 = r.info.outage.iter().map(|o| (o - cfg.qoe.outage_cap).max(0.0)).sum();
            prop_assert_eq!(r.info.system_qoe, qoe);
            prop_assert!((r.reward - (qoe - cfg.penalty_weight * penalty)).abs() < 1e-12);
            prop_assert_eq!(r.reward, r.info.reward());
            prop_assert!(r.obs.iter().all(|o| o.iter().all(|v| v.is_finite())));
            for (o, &id) in r.obs.iter().zip(a) {
                prop_assert_eq!(o.previous_action(64), Some(id));
            }
        }
    }

    #[test]
    fn trajectories_depend_only_on_seed_and_actions(seed in 0u64..1000, actions in prop::collection::vec(prop::collection::vec(0usize..64, 3), 1..20)) {
        let mut a = Env::new(EnvConfig::default()).unwrap();
        let mut b = Env::new(EnvConfig::default()).unwrap();
        a.reset(seed).unwrap();
        b.reset(seed).unwrap();
        for act in &actions {
            let (ra, rb) = (a.step(act).unwrap(), b.step(act).unwrap());
            prop_assert_eq!(ra.reward.to_bits(), rb.reward.to_bits());
            prop_assert_eq!(ra.obs, rb.obs);
        }
    }

    #[test]
    fn every_action_respects_the_power_budget(id in 0usize..64) {
        let cfg = EnvConfig::default();
        let a = cfg.action_space().decode(id).unwrap();
        prop_assert!(cfg.power_levels[a.power] <= cfg.power_budget);
    }
}
