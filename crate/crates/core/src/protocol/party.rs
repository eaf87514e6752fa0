use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::condense::Condenser;
use crate::extract::{nmext, BitString, StrongExtractor};
use crate::ff::FieldCtx;
use crate::mac::{Mac, MacParams};

use super::message::{Direction, Flavor, Message, Payload, WireLayout};
use super::{ProtocolError, ProtocolParams};

/// Widest secret the protocols run on.
pub const MAX_RUN_N: u32 = 127;
/// The non-malleable extractor's field is chosen above `2^min(width, 62)`.
const MAX_FIELD_BITS: u32 = 62;

/// Everything both parties derive from the public parameters.
#[derive(Debug, Clone)]
pub struct Setup {
    params: ProtocolParams,
    flavor: Flavor,
    ext: StrongExtractor,
    cond: Option<Condenser>,
    nm_field: FieldCtx,
    mac: Mac,
    lr_mac: Option<Mac>,
    layout: WireLayout,
}

impl Setup {
    pub fn new(params: ProtocolParams, flavor: Flavor) -> Result<Self, ProtocolError> {
        let p = &params;
        let unrunnable = |why: String| Err(ProtocolError::Unrunnable(why));
        if p.n > MAX_RUN_N {
            return unrunnable(format!("n={} exceeds {MAX_RUN_N}", p.n));
        }
        if 2 * p.v_small > p.m_nm {
            return unrunnable(format!("MAC key 2v'={} exceeds m'={}", 2 * p.v_small, p.m_nm));
        }
        if p.m_out == 0 || p.m_out > p.n {
            return unrunnable(format!("final key length {} outside 1..={}", p.m_out, p.n));
        }
        let (width, phases) = match flavor {
            Flavor::TwoRound => (p.n, 1),
            Flavor::MultiPhase => {
                if p.s + p.ell > p.n || p.m_nm > p.n {
                    return unrunnable(format!(
                        "extractor ranges s+l={} and m'={} must fit in n={}",
                        p.s + p.ell,
                        p.m_nm,
                        p.n
                    ));
                }
                (p.n_row, p.c)
            }
        };
        if p.m_nm > MAX_FIELD_BITS {
            return unrunnable(format!("m'={} exceeds {MAX_FIELD_BITS}", p.m_nm));
        }
        let nm_field = FieldCtx::smallest_above(p.m_nm, 1u64 << width.min(MAX_FIELD_BITS))?;
        let cond = match flavor {
            Flavor::TwoRound => None,
            Flavor::MultiPhase => Some(Condenser::new(p.n, p.t_cond)?),
        };
        let lr_mac = match flavor {
            Flavor::TwoRound => None,
            Flavor::MultiPhase => Some(Mac::new(MacParams::new(p.v_big, p.d_seed)?)?),
        };
        let layout = WireLayout {
            flavor,
            phases,
            y_bits: nm_field.element_bits(),
            s_bits: p.s,
            w_bits: p.d_seed,
            t_bits: p.v_small,
            l_bits: p.v_big,
            sc_bits: p.v_small,
        };
        Ok(Setup {
            ext: StrongExtractor::new(p.n)?,
            mac: Mac::new(MacParams::new(p.v_small, p.d_seed)?)?,
            params,
            flavor,
            cond,
            nm_field,
            lr_mac,
            layout,
        })
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn layout(&self) -> &WireLayout {
        &self.layout
    }

    pub fn nm_field(&self) -> &FieldCtx {
        &self.nm_field
    }

    pub fn mac(&self) -> &Mac {
        &self.mac
    }

    pub fn lr_mac(&self) -> Option<&Mac> {
        self.lr_mac.as_ref()
    }

    /// Number of phases `C` (1 in the two-round flavor).
    pub fn phases(&self) -> u32 {
        self.layout.phases
    }

    /// Calls each party accepts before it must have terminated.
    pub fn call_budget(&self) -> (u32, u32) {
        match self.flavor {
            Flavor::TwoRound => (2, 1),
            Flavor::MultiPhase => (self.phases() + 1, self.phases() + 1),
        }
    }

    /// The sources fed to the non-malleable extractor, one per phase.
    pub fn rows(&self, x: &BitString) -> Result<Vec<BitString>, ProtocolError> {
        if x.len() != self.params.n {
            return Err(ProtocolError::SecretLength {
                got: x.len(),
                expected: self.params.n,
            });
        }
        match &self.cond {
            None => Ok(vec![*x]),
            Some(c) => Ok(c.condense(x)?.rows),
        }
    }

    pub fn sample_y<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        let y = rng.gen_range(0..self.nm_field.q());
        BitString::new(y as u128, self.layout.y_bits).expect("q fits its element width")
    }

    pub fn sample_w<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        BitString::random(self.layout.w_bits, rng).expect("seed width is at most 127")
    }

    /// `nmExt(row; y)`, both read as field elements.
    pub fn nm(&self, row: &BitString, y: &BitString) -> Result<BitString, ProtocolError> {
        let q = self.nm_field.q() as u128;
        let x = (row.value() % q) as u64;
        let y = (y.value() % q) as u64;
        Ok(nmext(x, y, &self.nm_field)?)
    }

    /// `Ext_{a..b}(X; W)`.
    pub fn ext(&self, x: &BitString, w: &BitString, a: u32, b: u32) -> Result<BitString, ProtocolError> {
        Ok(self.ext.range(x, w, a, b)?)
    }

    pub fn final_key(&self, x: &BitString, w: &BitString) -> Result<BitString, ProtocolError> {
        self.ext(x, w, 1, self.params.m_out)
    }

    /// Seed-MAC tag under the first `2v'` bits of `key`.
    pub fn tag(&self, key: &BitString, msg: &BitString) -> Result<BitString, ProtocolError> {
        let key = key.slice(1, self.mac.params().key_len())?;
        Ok(self.mac.tag(&key, msg)?)
    }

    pub fn lr_tag(&self, key: &BitString, msg: &BitString) -> Result<BitString, ProtocolError> {
        let mac = self.lr_mac.as_ref().ok_or(ProtocolError::WrongFlavor)?;
        Ok(mac.tag(key, msg)?)
    }

    /// `Z = Ext_{s+1..s+l}(X; W)`.
    fn z_key(&self, x: &BitString, w: &BitString) -> Result<BitString, ProtocolError> {
        let p = &self.params;
        self.ext(x, w, p.s + 1, p.s + p.ell)
    }

    /// `S = Ext_{1..s}(X; W)`.
    fn liveness(&self, x: &BitString, w: &BitString) -> Result<BitString, ProtocolError> {
        self.ext(x, w, 1, self.params.s)
    }

    /// `Z_C = Ext_{1..m'}(X; W_C)`.
    fn final_mac_key(&self, x: &BitString, w: &BitString) -> Result<BitString, ProtocolError> {
        self.ext(x, w, 1, self.params.m_nm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// Wrong shape, phase, direction or field width.
    Malformed,
    /// `T != MAC_R(W)`.
    Tag,
    /// `L != lrMAC_Z(W)`.
    LrTag,
    /// `S != Ext_{1..s}(X; W)`.
    Liveness,
    /// `S_C != MAC_{Z_C}(W_{C+1})`.
    FinalTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Accept(BitString),
    Reject(RejectReason),
}

impl Status {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, Status::Running)
    }

    pub fn key(&self) -> Option<&BitString> {
        match self {
            Status::Accept(k) => Some(k),
            _ => None,
        }
    }
}

/// State shared by both roles.
#[derive(Debug, Clone)]
struct Core {
    setup: Arc<Setup>,
    x: BitString,
    rows: Vec<BitString>,
    tape: ChaCha8Rng,
    /// Messages handled so far.
    phase: u32,
    status: Status,
}

impl Core {
    fn new(setup: Arc<Setup>, x: BitString, tape_seed: u64) -> Result<Self, ProtocolError> {
        let rows = setup.rows(&x)?;
        Ok(Core {
            setup,
            x,
            rows,
            tape: ChaCha8Rng::seed_from_u64(tape_seed),
            phase: 0,
            status: Status::Running,
        })
    }

    /// Accepts `msg` only if it is the well-formed message of `(phase, direction)`.
    fn expect<'m>(&self, msg: Option<&'m Message>, phase: u32, direction: Direction) -> Option<&'m Message> {
        let msg = msg?;
        let ok = msg.phase == phase && msg.direction == direction && self.setup.layout.validate(msg).is_ok();
        ok.then_some(msg)
    }

    fn finish(&mut self, out: Result<Option<Message>, RejectReason>) -> Option<Message> {
        match out {
            Ok(m) => m,
            Err(reason) => {
                self.status = Status::Reject(reason);
                None
            }
        }
    }
}

fn check(cond: bool, reason: RejectReason) -> Result<(), RejectReason> {
    if cond {
        Ok(())
    } else {
        Err(reason)
    }
}

/// Alice's side. Call `i` handles Bob's phase `i-1` message (call 1 starts).
#[derive(Debug, Clone)]
pub struct Alice {
    core: Core,
    y: Option<BitString>,
    z_prev: Option<BitString>,
}

impl Alice {
    pub fn new(setup: Arc<Setup>, x: BitString, tape_seed: u64) -> Result<Self, ProtocolError> {
        Ok(Alice {
            core: Core::new(setup, x, tape_seed)?,
            y: None,
            z_prev: None,
        })
    }

    pub fn status(&self) -> &Status {
        &self.core.status
    }

    /// Messages handled so far.
    pub fn calls(&self) -> u32 {
        self.core.phase
    }

    /// Handles one oracle call. Returns the outgoing message, if any; a
    /// terminated party ignores the call and returns nothing.
    pub fn step(&mut self, incoming: Option<&Message>) -> Option<Message> {
        if self.core.status.is_terminal() {
            return None;
        }
        self.core.phase += 1;
        let out = self.handle(incoming);
        self.core.finish(out)
    }

    fn handle(&mut self, incoming: Option<&Message>) -> Result<Option<Message>, RejectReason> {
        let setup = Arc::clone(&self.core.setup);
        let i = self.core.phase;
        if i == 1 {
            if incoming.is_some() {
                return Err(RejectReason::Malformed);
            }
            let y = setup.sample_y(&mut self.core.tape);
            self.y = Some(y);
            return Ok(Some(Message::new(1, Direction::AliceToBob, Payload::P1A { y })));
        }
        // phase j = i-1 response from Bob
        let j = i - 1;
        let msg = self
            .core
            .expect(incoming, j, Direction::BobToAlice)
            .ok_or(RejectReason::Malformed)?;
        let x = self.core.x;
        let (w, t, l) = match &msg.payload {
            Payload::P1B { w, t } => (*w, *t, None),
            Payload::PiB { w, t, l } => (*w, *t, Some(*l)),
            _ => return Err(RejectReason::Malformed),
        };
        let internal = |_| RejectReason::Malformed;
        if let Some(l) = l {
            let z_prev = self.z_prev.ok_or(RejectReason::Malformed)?;
            check(setup.lr_tag(&z_prev, &w).map_err(internal)? == l, RejectReason::LrTag)?;
        }
        let y = self.y.take().ok_or(RejectReason::Malformed)?;
        let r = setup.nm(&self.core.rows[(j - 1) as usize], &y).map_err(internal)?;
        check(setup.tag(&r, &w).map_err(internal)? == t, RejectReason::Tag)?;

        if setup.flavor == Flavor::TwoRound {
            self.core.status = Status::Accept(setup.final_key(&x, &w).map_err(internal)?);
            return Ok(None);
        }
        let c = setup.phases();
        if j < c {
            self.z_prev = Some(setup.z_key(&x, &w).map_err(internal)?);
            let s = setup.liveness(&x, &w).map_err(internal)?;
            let y = setup.sample_y(&mut self.core.tape);
            self.y = Some(y);
            return Ok(Some(Message::new(j + 1, Direction::AliceToBob, Payload::PiA { s, y })));
        }
        let z_c = setup.final_mac_key(&x, &w).map_err(internal)?;
        let w_last = setup.sample_w(&mut self.core.tape);
        let s_c = setup.tag(&z_c, &w_last).map_err(internal)?;
        self.core.status = Status::Accept(setup.final_key(&x, &w_last).map_err(internal)?);
        Ok(Some(Message::new(
            c + 1,
            Direction::AliceToBob,
            Payload::FinalA { s_c, w: w_last },
        )))
    }
}

/// Bob's side. Call `i` handles Alice's phase `i` message.
#[derive(Debug, Clone)]
pub struct Bob {
    core: Core,
    w_prev: Option<BitString>,
}

impl Bob {
    pub fn new(setup: Arc<Setup>, x: BitString, tape_seed: u64) -> Result<Self, ProtocolError> {
        Ok(Bob {
            core: Core::new(setup, x, tape_seed)?,
            w_prev: None,
        })
    }

    pub fn status(&self) -> &Status {
        &self.core.status
    }

    pub fn calls(&self) -> u32 {
        self.core.phase
    }

    pub fn step(&mut self, incoming: &Message) -> Option<Message> {
        if self.core.status.is_terminal() {
            return None;
        }
        self.core.phase += 1;
        let out = self.handle(incoming);
        self.core.finish(out)
    }

    /// `(W', T' = MAC_{R'}(W'))` for phase `i` with seed `y`.
    fn respond(&mut self, i: u32, y: &BitString) -> Result<(BitString, BitString), ProtocolError> {
        let setup = &self.core.setup;
        let w = setup.sample_w(&mut self.core.tape);
        let r = setup.nm(&self.core.rows[(i - 1) as usize], y)?;
        Ok((w, setup.tag(&r, &w)?))
    }

    fn handle(&mut self, incoming: &Message) -> Result<Option<Message>, RejectReason> {
        let setup = Arc::clone(&self.core.setup);
        let i = self.core.phase;
        let msg = self
            .core
            .expect(Some(incoming), i, Direction::AliceToBob)
            .ok_or(RejectReason::Malformed)?;
        let x = self.core.x;
        let internal = |_| RejectReason::Malformed;
        match &msg.payload {
            Payload::P1A { y } => {
                let (w, t) = self.respond(1, y).map_err(internal)?;
                if setup.flavor == Flavor::TwoRound {
                    self.core.status = Status::Accept(setup.final_key(&x, &w).map_err(internal)?);
                } else {
                    self.w_prev = Some(w);
                }
                Ok(Some(Message::new(1, Direction::BobToAlice, Payload::P1B { w, t })))
            }
            Payload::PiA { s, y } => {
                let w_prev = self.w_prev.ok_or(RejectReason::Malformed)?;
                check(setup.liveness(&x, &w_prev).map_err(internal)? == *s, RejectReason::Liveness)?;
                let z_prev = setup.z_key(&x, &w_prev).map_err(internal)?;
                let (w, t) = self.respond(i, y).map_err(internal)?;
                let l = setup.lr_tag(&z_prev, &w).map_err(internal)?;
                self.w_prev = Some(w);
                Ok(Some(Message::new(i, Direction::BobToAlice, Payload::PiB { w, t, l })))
            }
            Payload::FinalA { s_c, w } => {
                let w_prev = self.w_prev.ok_or(RejectReason::Malformed)?;
                let z_c = setup.final_mac_key(&x, &w_prev).map_err(internal)?;
                check(setup.tag(&z_c, w).map_err(internal)? == *s_c, RejectReason::FinalTag)?;
                self.core.status = Status::Accept(setup.final_key(&x, w).map_err(internal)?);
                Ok(None)
            }
            _ => Err(RejectReason::Malformed),
        }
    }
}
