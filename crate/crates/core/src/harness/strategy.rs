use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::extract::BitString;
use crate::protocol::{Direction, Flavor, Message, Payload, Role};

use super::session::{Call, EveStrategy, EveView};
use super::HarnessError;

pub const STRATEGY_NAMES: [&str; 7] = [
    "passive",
    "flip_seed",
    "tamper_tag",
    "substitute_W",
    "desync_skip_alice",
    "replay",
    "final_forge",
];

fn default_shift() -> u64 {
    1
}

fn default_bit() -> u32 {
    1
}

/// Knobs shared by the built-in strategies; each reads only its own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyCfg {
    /// `flip_seed`: the constant `c` in `y + c` or `y xor c`.
    #[serde(default = "default_shift")]
    pub shift: u64,
    /// `flip_seed`: use `y xor c` instead of `y + c mod q`.
    #[serde(default)]
    pub xor: bool,
    /// Phase targeted by `flip_seed`, `tamper_tag` and `substitute_W`.
    /// `flip_seed` hits every phase when unset; the others default to phase 1
    /// (phase 2 for a tampered `l`).
    #[serde(default)]
    pub phase: Option<u32>,
    /// `tamper_tag`: one of `t`, `l`, `s_c`.
    #[serde(default)]
    pub field: Option<String>,
    /// `tamper_tag`: position flipped.
    #[serde(default = "default_bit")]
    pub bit: u32,
}

impl Default for StrategyCfg {
    fn default() -> Self {
        StrategyCfg {
            shift: default_shift(),
            xor: false,
            phase: None,
            field: None,
            bit: default_bit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub name: String,
    #[serde(default)]
    pub cfg: StrategyCfg,
}

impl StrategySpec {
    pub fn named(name: &str) -> Self {
        StrategySpec {
            name: name.to_string(),
            cfg: StrategyCfg::default(),
        }
    }
}

type Transform = Box<dyn FnMut(Message, &EveView<'_>, &mut ChaCha8Rng) -> Message + Send>;

/// Synchronous relay that rewrites each message in flight.
struct Relay {
    name: &'static str,
    f: Transform,
}

impl EveStrategy for Relay {
    fn name(&self) -> &'static str {
        self.name
    }

    fn next_call(&mut self, view: &EveView<'_>, tape: &mut ChaCha8Rng) -> Call {
        let Some(last) = view.last() else {
            return Call::Alice(None);
        };
        let Some(msg) = last.output.clone() else {
            return Call::Halt;
        };
        let msg = (self.f)(msg, view, tape);
        match last.role {
            Role::Alice => Call::Bob(msg),
            Role::Bob => Call::Alice(Some(msg)),
        }
    }
}

fn relay(name: &'static str, f: impl FnMut(Message, &EveView<'_>, &mut ChaCha8Rng) -> Message + Send + 'static) -> Box<dyn EveStrategy> {
    Box::new(Relay { name, f: Box::new(f) })
}

fn random_bits(len: u32, tape: &mut ChaCha8Rng) -> BitString {
    BitString::random(len, tape).expect("message fields are at most 128 bits")
}

/// Talks to Alice once, then drives Bob alone with fabricated messages.
struct SkipAlice {
    /// Fabricates Bob's phase-`i` input from the first exchange.
    fabricate: fn(u32, &EveView<'_>, &mut ChaCha8Rng) -> Option<Message>,
    name: &'static str,
}

impl EveStrategy for SkipAlice {
    fn name(&self) -> &'static str {
        self.name
    }

    fn next_call(&mut self, view: &EveView<'_>, tape: &mut ChaCha8Rng) -> Call {
        if view.bob_terminal {
            return Call::Halt;
        }
        if view.setup.flavor() == Flavor::TwoRound && self.name == "desync_skip_alice" {
            // no liveness test exists: call Bob before Alice ever speaks
            if view.bob_calls == 0 {
                let y = view.setup.sample_y(tape);
                return Call::Bob(Message::new(1, Direction::AliceToBob, Payload::P1A { y }));
            }
            return Call::Halt;
        }
        match (view.alice_calls, view.bob_calls) {
            (0, _) => Call::Alice(None),
            (_, 0) => match view.sent_by(Role::Alice, 1) {
                Some(m) => Call::Bob(m.clone()),
                None => Call::Halt,
            },
            (_, b) => match (self.fabricate)(b + 1, view, tape) {
                Some(m) => Call::Bob(m),
                None => Call::Halt,
            },
        }
    }
}

/// Phase-`i` message to Bob built from fresh guesses.
fn fabricate_fresh(i: u32, view: &EveView<'_>, tape: &mut ChaCha8Rng) -> Option<Message> {
    let setup = view.setup;
    let layout = setup.layout();
    let c = setup.phases();
    let payload = if i <= c {
        Payload::PiA {
            s: random_bits(layout.s_bits, tape),
            y: setup.sample_y(tape),
        }
    } else if i == c + 1 {
        Payload::FinalA {
            s_c: random_bits(layout.sc_bits, tape),
            w: setup.sample_w(tape),
        }
    } else {
        return None;
    };
    Some(Message::new(i, Direction::AliceToBob, payload))
}

/// Phase-`i` message to Bob recycled from the first exchange: the stale seed
/// `Y_1`, Bob's own `W_1` as the liveness answer, and `T_1` as the final tag.
fn fabricate_replay(i: u32, view: &EveView<'_>, _: &mut ChaCha8Rng) -> Option<Message> {
    let setup = view.setup;
    if setup.flavor() == Flavor::TwoRound {
        return None;
    }
    let layout = setup.layout();
    let y1 = *view.sent_by(Role::Alice, 1)?.payload.y()?;
    let Payload::P1B { w, t } = view.sent_by(Role::Bob, 1)?.payload else {
        return None;
    };
    let c = setup.phases();
    let payload = if i <= c {
        Payload::PiA {
            s: w.slice(1, layout.s_bits).ok()?,
            y: y1,
        }
    } else if i == c + 1 {
        Payload::FinalA { s_c: t, w }
    } else {
        return None;
    };
    Some(Message::new(i, Direction::AliceToBob, payload))
}

fn flip_field(payload: &mut Payload, field: &str, bit: u32) {
    let flip = |b: &mut BitString| {
        if let Ok(f) = b.flip(bit) {
            *b = f;
        }
    };
    match (payload, field) {
        (Payload::P1B { t, .. } | Payload::PiB { t, .. }, "t") => flip(t),
        (Payload::PiB { l, .. }, "l") => flip(l),
        (Payload::FinalA { s_c, .. }, "s_c") => flip(s_c),
        _ => {}
    }
}

/// Builds a built-in strategy. Names follow [`STRATEGY_NAMES`].
pub fn make_strategy(name: &str, cfg: &StrategyCfg) -> Result<Box<dyn EveStrategy>, HarnessError> {
    let bad = |why: &str| Err(HarnessError::StrategyConfig(format!("{name}: {why}")));
    let strategy = match name {
        "passive" => relay("passive", |m, _, _| m),
        "flip_seed" => {
            if cfg.shift == 0 {
                return bad("c must be nonzero");
            }
            let (shift, xor, phase) = (cfg.shift, cfg.xor, cfg.phase);
            relay("flip_seed", move |mut m, view, _| {
                if phase.is_some_and(|p| p != m.phase) {
                    return m;
                }
                let q = view.setup.nm_field().q();
                let width = view.setup.layout().y_bits;
                if let Payload::P1A { y } | Payload::PiA { y, .. } = &mut m.payload {
                    let v = y.value() as u64;
                    let moved = if xor {
                        v ^ shift
                    } else {
                        ((v as u128 + shift as u128) % q as u128) as u64
                    };
                    *y = BitString::truncated(moved as u128, width).expect("seed width fits");
                }
                m
            })
        }
        "tamper_tag" => {
            let field = cfg.field.clone().unwrap_or_else(|| "t".into());
            if !["t", "l", "s_c"].contains(&field.as_str()) {
                return bad("field must be t, l or s_c");
            }
            let phase = cfg.phase.unwrap_or(if field == "l" { 2 } else { 1 });
            let bit = cfg.bit;
            relay("tamper_tag", move |mut m, _, _| {
                if field == "s_c" || m.phase == phase {
                    flip_field(&mut m.payload, &field, bit);
                }
                m
            })
        }
        "substitute_W" => {
            let phase = cfg.phase.unwrap_or(1);
            relay("substitute_W", move |mut m, _, tape| {
                if m.phase == phase && m.direction == Direction::BobToAlice {
                    if let Payload::P1B { w, .. } | Payload::PiB { w, .. } = &mut m.payload {
                        let old = *w;
                        while *w == old {
                            *w = random_bits(old.len(), tape);
                        }
                    }
                }
                m
            })
        }
        "desync_skip_alice" => Box::new(SkipAlice {
            fabricate: fabricate_fresh,
            name: "desync_skip_alice",
        }),
        "replay" => Box::new(SkipAlice {
            fabricate: fabricate_replay,
            name: "replay",
        }),
        "final_forge" => relay("final_forge", |mut m, view, tape| {
            let layout = *view.setup.layout();
            match (&mut m.payload, view.setup.flavor()) {
                (Payload::FinalA { s_c, w }, Flavor::MultiPhase) => {
                    *s_c = random_bits(layout.sc_bits, tape);
                    *w = view.setup.sample_w(tape);
                }
                (Payload::P1B { w, t }, Flavor::TwoRound) => {
                    *w = view.setup.sample_w(tape);
                    *t = random_bits(layout.t_bits, tape);
                }
                _ => {}
            }
            m
        }),
        _ => return Err(HarnessError::UnknownStrategy(name.to_string())),
    };
    Ok(strategy)
}
