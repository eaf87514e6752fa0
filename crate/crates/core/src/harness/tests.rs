use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::extract::BitString;
use crate::protocol::{derive_params, Flavor, RejectReason, Setup, Status};

fn toy(flavor: Flavor) -> Arc<Setup> {
    let p = derive_params(96, 0.5, 0.25, 1, false).unwrap();
    Arc::new(Setup::new(p, flavor).unwrap())
}

fn small_two_round() -> Arc<Setup> {
    let p = derive_params(32, 0.5, 0.5, 0, false).unwrap();
    Arc::new(Setup::new(p, Flavor::TwoRound).unwrap())
}

fn session(setup: &Arc<Setup>, name: &str, cfg: StrategyCfg, tape: u64, post: bool) -> SessionOutcome {
    let x = BitString::new(0x0bad_cafe_f00d_1234_5678, 96).unwrap();
    let x = BitString::truncated(x.value(), setup.params().n).unwrap();
    let mut s = make_strategy(name, &cfg).unwrap();
    run_session(setup, &x, s.as_mut(), post, tape).unwrap()
}

fn named(name: &str) -> StrategySpec {
    StrategySpec::named(name)
}

#[test]
fn passive_sessions_agree() {
    for flavor in [Flavor::TwoRound, Flavor::MultiPhase] {
        let setup = toy(flavor);
        for tape in 0..20 {
            let o = session(&setup, "passive", StrategyCfg::default(), tape, false);
            assert!(o.r_a.is_some() && o.r_a == o.r_b, "{flavor:?} tape {tape}");
            assert!(o.synchronous);
            assert_eq!(o.flags, Flags::default());
            assert!(o.aborted.is_none());
            let expected = match flavor {
                Flavor::TwoRound => 3,
                Flavor::MultiPhase => 10,
            };
            assert_eq!(o.transcript.len(), expected);
        }
    }
}

struct Halter;

impl EveStrategy for Halter {
    fn name(&self) -> &'static str {
        "halt"
    }
    fn next_call(&mut self, _: &EveView<'_>, _: &mut ChaCha8Rng) -> Call {
        Call::Halt
    }
}

/// Pokes Alice forever.
struct Greedy;

impl EveStrategy for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }
    fn next_call(&mut self, view: &EveView<'_>, _: &mut ChaCha8Rng) -> Call {
        match view.last().and_then(|r| r.output.clone()) {
            Some(m) if view.bob_calls == 0 => Call::Bob(m),
            _ => Call::Alice(None),
        }
    }
}

#[test]
fn halting_leaves_both_running() {
    let setup = toy(Flavor::MultiPhase);
    let x = BitString::zeros(96).unwrap();
    let o = run_session(&setup, &x, &mut Halter, true, 1).unwrap();
    assert_eq!((o.r_a, o.r_b), (None, None));
    assert_eq!((&o.alice, &o.bob), (&Status::Running, &Status::Running));
    assert!(o.transcript.is_empty());
    assert!(o.synchronous);
}

#[test]
fn budgets_are_enforced() {
    for flavor in [Flavor::TwoRound, Flavor::MultiPhase] {
        let setup = toy(flavor);
        let x = BitString::zeros(96).unwrap();
        let o = run_session(&setup, &x, &mut Greedy, false, 1).unwrap();
        assert_eq!(o.aborted, Some(AbortReason::AliceBudget));
        let alice_calls = o.transcript.iter().filter(|r| r.call.starts_with("Alice")).count() as u32;
        assert_eq!(alice_calls, setup.call_budget().0);
        // Alice rejected on the second empty call and ignored the rest
        assert!(o.transcript.iter().skip(3).all(|r| r.verdict == Verdict::Ignored || r.call.starts_with("Bob")));
    }
}

#[test]
fn post_application_gating() {
    let setup = toy(Flavor::MultiPhase);
    for post in [false, true] {
        let o = session(&setup, "passive", StrategyCfg::default(), 5, post);
        for g in &o.gate_log {
            assert!(!g.r_a_visible || g.alice_terminal);
            assert!(!g.r_b_visible || g.bob_terminal);
            if !post {
                assert!(!g.r_a_visible && !g.r_b_visible);
            }
        }
        // Alice accepts on her last call, before Bob's last call
        let before_last = &o.gate_log[o.gate_log.len() - 2];
        assert_eq!(before_last.r_a_visible, post);
        assert!(before_last.alice_terminal);
        assert!(!o.gate_log[..o.gate_log.len() - 2].iter().any(|g| g.r_a_visible));
    }
}

#[test]
fn replay_determinism() {
    let setup = toy(Flavor::MultiPhase);
    let source = SourceModel::Uniform.build(96).unwrap();
    for name in STRATEGY_NAMES {
        let a = run_trial(&setup, &source, &named(name), 42, 7, true).unwrap();
        let b = run_trial(&setup, &source, &named(name), 42, 7, true).unwrap();
        assert_eq!(a.transcript_jsonl(), b.transcript_jsonl(), "{name}");
        assert_eq!(a.gate_log, b.gate_log);
    }
}

#[test]
fn transcript_lines_have_the_four_keys() {
    let setup = toy(Flavor::TwoRound);
    let o = session(&setup, "passive", StrategyCfg::default(), 1, false);
    let jsonl = o.transcript_jsonl();
    let lines: Vec<&str> = jsonl.lines().collect();
    assert_eq!(lines.len(), 3);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    let mut keys: Vec<&str> = first.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["call", "in", "out", "verdict"]);
    assert_eq!(first["call"], "Alice_1");
    assert!(first["in"].is_null());
}

#[test]
fn non_synchronous_strategies_get_bob_rejected() {
    let setup = toy(Flavor::MultiPhase);
    for name in ["desync_skip_alice", "replay"] {
        for tape in 0..20 {
            let o = session(&setup, name, StrategyCfg::default(), tape, false);
            assert!(!o.synchronous, "{name}");
            assert_eq!(o.bob, Status::Reject(RejectReason::Liveness), "{name}");
            assert!(!o.flags.desync_accept);
            assert_eq!(o.alice, Status::Running);
        }
    }
}

#[test]
fn tampering_rejects() {
    let setup = toy(Flavor::MultiPhase);
    let cases = [
        ("t", None, RejectReason::Tag, true),
        ("t", Some(3), RejectReason::Tag, true),
        ("l", None, RejectReason::LrTag, true),
        ("l", Some(4), RejectReason::LrTag, true),
        ("s_c", None, RejectReason::FinalTag, false),
    ];
    for (field, phase, reason, alice_side) in cases {
        let cfg = StrategyCfg {
            field: Some(field.into()),
            phase,
            ..Default::default()
        };
        let o = session(&setup, "tamper_tag", cfg, 3, false);
        let status = if alice_side { &o.alice } else { &o.bob };
        assert_eq!(status, &Status::Reject(reason), "{field} {phase:?}");
        assert!(!o.flags.robustness_broken);
    }
    assert!(make_strategy("tamper_tag", &StrategyCfg { field: Some("w".into()), ..Default::default() }).is_err());
}

#[test]
fn final_forge_and_substitution_are_caught() {
    let setup = toy(Flavor::MultiPhase);
    for tape in 0..20 {
        let o = session(&setup, "final_forge", StrategyCfg::default(), tape, true);
        assert!(o.r_a.is_some());
        assert_eq!(o.bob, Status::Reject(RejectReason::FinalTag));
        let o = session(&setup, "substitute_W", StrategyCfg::default(), tape, false);
        assert_eq!(o.alice, Status::Reject(RejectReason::Tag));
        let cfg = StrategyCfg {
            phase: Some(2),
            ..Default::default()
        };
        let o = session(&setup, "substitute_W", cfg, tape, false);
        assert_eq!(o.alice, Status::Reject(RejectReason::LrTag));
    }
    let setup = toy(Flavor::TwoRound);
    for tape in 0..20 {
        let o = session(&setup, "final_forge", StrategyCfg::default(), tape, false);
        assert_eq!(o.alice, Status::Reject(RejectReason::Tag));
        assert!(o.r_b.is_some());
    }
}

#[test]
fn flip_seed_breaks_the_tag_check() {
    for (xor, shift) in [(false, 1), (true, 1), (false, 12345)] {
        let cfg = StrategyCfg {
            xor,
            shift,
            ..Default::default()
        };
        let stats = run_trials(&small_two_round(), &SourceModel::Uniform, &StrategySpec { name: "flip_seed".into(), cfg }, 300, 4, false).unwrap();
        // Alice's R differs from Bob's R', so her MAC check fails
        assert!(stats.alice_accept <= 2, "{stats:?}");
        assert_eq!(stats.bob_accept, 300);
    }
    assert!(make_strategy("flip_seed", &StrategyCfg { shift: 0, ..Default::default() }).is_err());
    assert!(matches!(make_strategy("bogus", &StrategyCfg::default()), Err(HarnessError::UnknownStrategy(_))));
}

#[test]
fn trials_partition_and_are_order_independent() {
    let setup = toy(Flavor::MultiPhase);
    let spec = named("tamper_tag");
    let stats = run_trials(&setup, &SourceModel::Uniform, &named("passive"), 200, 9, false).unwrap();
    assert_eq!(stats.both_accept, 200);
    assert_eq!(stats.robustness_broken, 0);
    let a = run_trials(&setup, &SourceModel::Uniform, &spec, 64, 9, false).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| run_trials(&setup, &SourceModel::Uniform, &spec, 64, 9, false).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.both_accept + a.alice_only + a.bob_only + a.neither + a.aborted, a.trials);
    assert_eq!(a.neither, 64);
    assert!(run_trials(&setup, &SourceModel::Uniform, &spec, 0, 9, false).is_err());
}

#[test]
fn frequency_checks() {
    let c = check_frequency(0, 100, 0.01);
    assert!(c.pass);
    assert!((c.margin - 3.0 * (0.01f64 * 0.99 / 100.0).sqrt()).abs() < 1e-12);
    assert!(!check_frequency(50, 100, 0.01).pass);
    assert!(check_frequency(100, 100, 1.5).pass);
}

#[test]
fn sources() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = SourceModel::Interval { start: 100, size: 16 }.build(12).unwrap();
    for _ in 0..100 {
        let v = s.sample(&mut rng).value();
        assert!((100..116).contains(&v));
    }
    assert_eq!(s.min_entropy(), 4.0);
    let s = SourceModel::FixedHighBits { free_bits: 8, high: 0b101 }.build(11).unwrap();
    for _ in 0..100 {
        assert_eq!(s.sample(&mut rng).value() >> 8, 0b101);
    }
    let s = SourceModel::RandomSubset { size: 50, seed: 1 }.build(40).unwrap();
    let t = SourceModel::RandomSubset { size: 50, seed: 1 }.build(40).unwrap();
    let draws: std::collections::BTreeSet<u128> = (0..2000).map(|_| s.sample(&mut rng).value()).collect();
    assert_eq!(draws.len(), 50);
    let mut rng2 = ChaCha8Rng::seed_from_u64(0);
    let mut rng3 = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(s.sample(&mut rng2), t.sample(&mut rng3));
    assert!(SourceModel::Interval { start: 4000, size: 200 }.build(12).is_err());
    assert!(SourceModel::RandomSubset { size: 9, seed: 0 }.build(3).is_err());
    assert!(SourceModel::FixedHighBits { free_bits: 4, high: 16 }.build(8).is_err());
    let json = serde_json::to_string(&SourceModel::Interval { start: 1, size: 2 }).unwrap();
    assert_eq!(json, r#"{"kind":"interval","start":1,"size":2}"#);
}

#[test]
fn extraction_estimates() {
    let setup = small_two_round();
    let e = estimate_extraction(&setup, &SourceModel::Uniform, &named("passive"), 20_000, 1, 4).unwrap();
    assert_eq!(e.accepts, 20_000);
    assert!(e.pass, "{e:?}");
    assert!(e.purified_distance < 2.0 * e.margin);
    let zero = estimate_extraction(&setup, &SourceModel::Uniform, &named("passive"), 10, 1, 0).unwrap();
    assert_eq!(zero.distance, 0.0);
    let forced = estimate_extraction(&setup, &SourceModel::Uniform, &named("final_forge"), 500, 1, 4);
    assert!(matches!(forced, Err(HarnessError::InsufficientAccepts { .. })));
    assert!(estimate_extraction(&setup, &SourceModel::Uniform, &named("passive"), 10, 1, 9).is_err());
}

#[test]
fn degenerate_source_is_flagged() {
    // X = 0 makes every key zero
    let setup = small_two_round();
    let src = SourceModel::FixedHighBits { free_bits: 0, high: 0 };
    let e = estimate_extraction(&setup, &src, &named("passive"), 2000, 2, 2).unwrap();
    assert_eq!(e.accepts, 2000);
    assert!((e.distance - 0.75).abs() < 1e-12);
    assert!(!e.pass);
}
