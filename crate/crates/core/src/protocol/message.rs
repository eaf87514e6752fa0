use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::BitString;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("buffer truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("field {field} has {got} bits, expected {expected}")]
    Length { field: &'static str, got: u32, expected: u32 },
    #[error("message for phase {got}, expected {expected}")]
    Phase { got: u32, expected: u32 },
    #[error("unknown direction byte {0}")]
    Direction(u8),
    #[error("no {direction:?} message exists in phase {phase}")]
    Shape { phase: u32, direction: Direction },
    #[error("field {0} does not fit its declared length")]
    Value(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    AliceToBob,
    BobToAlice,
}

impl Direction {
    fn byte(self) -> u8 {
        match self {
            Direction::AliceToBob => 0,
            Direction::BobToAlice => 1,
        }
    }
}

/// Which protocol a setup runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Two rounds, non-malleable extractor applied to `X` directly.
    TwoRound,
    /// `2C+1` rounds over the condensed rows, with liveness tests.
    MultiPhase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    P1A { y: BitString },
    PiA { s: BitString, y: BitString },
    P1B { w: BitString, t: BitString },
    PiB { w: BitString, t: BitString, l: BitString },
    FinalA { s_c: BitString, w: BitString },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    P1A,
    PiA,
    P1B,
    PiB,
    FinalA,
}

impl Payload {
    pub fn shape(&self) -> Shape {
        match self {
            Payload::P1A { .. } => Shape::P1A,
            Payload::PiA { .. } => Shape::PiA,
            Payload::P1B { .. } => Shape::P1B,
            Payload::PiB { .. } => Shape::PiB,
            Payload::FinalA { .. } => Shape::FinalA,
        }
    }

    /// Fields in wire order.
    pub fn fields(&self) -> Vec<(&'static str, &BitString)> {
        match self {
            Payload::P1A { y } => vec![("y", y)],
            Payload::PiA { s, y } => vec![("s", s), ("y", y)],
            Payload::P1B { w, t } => vec![("w", w), ("t", t)],
            Payload::PiB { w, t, l } => vec![("w", w), ("t", t), ("l", l)],
            Payload::FinalA { s_c, w } => vec![("s_c", s_c), ("w", w)],
        }
    }

    /// The extractor seed carried toward Alice or in the final phase.
    pub fn w(&self) -> Option<&BitString> {
        match self {
            Payload::P1B { w, .. } | Payload::PiB { w, .. } | Payload::FinalA { w, .. } => Some(w),
            _ => None,
        }
    }

    pub fn y(&self) -> Option<&BitString> {
        match self {
            Payload::P1A { y } | Payload::PiA { y, .. } => Some(y),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub phase: u32,
    pub direction: Direction,
    pub payload: Payload,
}

impl Message {
    pub fn new(phase: u32, direction: Direction, payload: Payload) -> Self {
        Message {
            phase,
            direction,
            payload,
        }
    }
}

/// Field widths of every message, fixed by the parameters and the setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireLayout {
    pub flavor: Flavor,
    /// Number of condenser rows; 1 in the two-round flavor.
    pub phases: u32,
    pub y_bits: u32,
    pub s_bits: u32,
    pub w_bits: u32,
    pub t_bits: u32,
    pub l_bits: u32,
    pub sc_bits: u32,
}

impl WireLayout {
    /// The payload variant carried in `(phase, direction)`, if any.
    pub fn shape(&self, phase: u32, direction: Direction) -> Option<Shape> {
        let c = self.phases;
        match (self.flavor, direction) {
            (_, _) if phase == 0 => None,
            (Flavor::TwoRound, _) if phase > 1 => None,
            (_, Direction::AliceToBob) if phase == 1 => Some(Shape::P1A),
            (_, Direction::BobToAlice) if phase == 1 => Some(Shape::P1B),
            (Flavor::MultiPhase, Direction::AliceToBob) if phase <= c => Some(Shape::PiA),
            (Flavor::MultiPhase, Direction::AliceToBob) if phase == c + 1 => Some(Shape::FinalA),
            (Flavor::MultiPhase, Direction::BobToAlice) if phase <= c => Some(Shape::PiB),
            _ => None,
        }
    }

    pub fn field_spec(&self, shape: Shape) -> Vec<(&'static str, u32)> {
        match shape {
            Shape::P1A => vec![("y", self.y_bits)],
            Shape::PiA => vec![("s", self.s_bits), ("y", self.y_bits)],
            Shape::P1B => vec![("w", self.w_bits), ("t", self.t_bits)],
            Shape::PiB => vec![("w", self.w_bits), ("t", self.t_bits), ("l", self.l_bits)],
            Shape::FinalA => vec![("s_c", self.sc_bits), ("w", self.w_bits)],
        }
    }

    /// Checks that the message has the shape and field widths its position requires.
    pub fn validate(&self, msg: &Message) -> Result<(), WireError> {
        let shape = self.shape(msg.phase, msg.direction).ok_or(WireError::Shape {
            phase: msg.phase,
            direction: msg.direction,
        })?;
        if shape != msg.payload.shape() {
            return Err(WireError::Shape {
                phase: msg.phase,
                direction: msg.direction,
            });
        }
        for ((field, value), (_, expected)) in msg.payload.fields().into_iter().zip(self.field_spec(shape)) {
            if value.len() != expected {
                return Err(WireError::Length {
                    field,
                    got: value.len(),
                    expected,
                });
            }
        }
        Ok(())
    }
}

/// Phase byte, direction byte, then each field as a 2-byte big-endian bit
/// length followed by its `ceil(len/8)` bytes, lowest positions first.
pub fn encode_message(msg: &Message) -> Vec<u8> {
    let mut out = vec![msg.phase as u8, msg.direction.byte()];
    for (_, value) in msg.payload.fields() {
        out.extend_from_slice(&(value.len() as u16).to_be_bytes());
        out.extend(value.to_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], WireError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(WireError::Truncated(self.bytes.len()));
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn field(&mut self, name: &'static str, expected: u32) -> Result<BitString, WireError> {
        let len = self.take(2)?;
        let len = u16::from_be_bytes([len[0], len[1]]) as u32;
        if len != expected {
            return Err(WireError::Length {
                field: name,
                got: len,
                expected,
            });
        }
        let body = self.take(len.div_ceil(8) as usize)?;
        BitString::from_bytes(body, len).map_err(|_| WireError::Value(name))
    }
}

pub fn decode_message(bytes: &[u8], layout: &WireLayout, expected_phase: u32) -> Result<Message, WireError> {
    let mut r = Reader { bytes, pos: 0 };
    let head = r.take(2)?;
    let (phase, direction) = (head[0] as u32, head[1]);
    if phase != expected_phase {
        return Err(WireError::Phase {
            got: phase,
            expected: expected_phase,
        });
    }
    let direction = match direction {
        0 => Direction::AliceToBob,
        1 => Direction::BobToAlice,
        d => return Err(WireError::Direction(d)),
    };
    let shape = layout
        .shape(phase, direction)
        .ok_or(WireError::Shape { phase, direction })?;
    let mut fields = Vec::new();
    for (name, len) in layout.field_spec(shape) {
        fields.push(r.field(name, len)?);
    }
    if r.pos != bytes.len() {
        return Err(WireError::Trailing(bytes.len() - r.pos));
    }
    let mut it = fields.into_iter();
    let mut next = || it.next().expect("field count matches the shape");
    let payload = match shape {
        Shape::P1A => Payload::P1A { y: next() },
        Shape::PiA => Payload::PiA { s: next(), y: next() },
        Shape::P1B => Payload::P1B { w: next(), t: next() },
        Shape::PiB => Payload::PiB {
            w: next(),
            t: next(),
            l: next(),
        },
        Shape::FinalA => Payload::FinalA { s_c: next(), w: next() },
    };
    Ok(Message::new(phase, direction, payload))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn layout() -> WireLayout {
        WireLayout {
            flavor: Flavor::MultiPhase,
            phases: 4,
            y_bits: 33,
            s_bits: 8,
            w_bits: 96,
            t_bits: 15,
            l_bits: 30,
            sc_bits: 15,
        }
    }

    fn filled(layout: &WireLayout, phase: u32, direction: Direction, seed: u128) -> Message {
        let shape = layout.shape(phase, direction).unwrap();
        let f: Vec<BitString> = layout
            .field_spec(shape)
            .iter()
            .enumerate()
            .map(|(i, &(_, len))| BitString::truncated(seed.rotate_left(17 * i as u32), len).unwrap())
            .collect();
        let payload = match shape {
            Shape::P1A => Payload::P1A { y: f[0] },
            Shape::PiA => Payload::PiA { s: f[0], y: f[1] },
            Shape::P1B => Payload::P1B { w: f[0], t: f[1] },
            Shape::PiB => Payload::PiB { w: f[0], t: f[1], l: f[2] },
            Shape::FinalA => Payload::FinalA { s_c: f[0], w: f[1] },
        };
        Message::new(phase, direction, payload)
    }

    fn all_positions(layout: &WireLayout) -> Vec<(u32, Direction)> {
        (0..=layout.phases + 2)
            .flat_map(|p| [(p, Direction::AliceToBob), (p, Direction::BobToAlice)])
            .filter(|&(p, d)| layout.shape(p, d).is_some())
            .collect()
    }

    #[test]
    fn shapes_follow_phase_and_direction() {
        let l = layout();
        assert_eq!(l.shape(1, Direction::AliceToBob), Some(Shape::P1A));
        assert_eq!(l.shape(1, Direction::BobToAlice), Some(Shape::P1B));
        assert_eq!(l.shape(3, Direction::AliceToBob), Some(Shape::PiA));
        assert_eq!(l.shape(4, Direction::BobToAlice), Some(Shape::PiB));
        assert_eq!(l.shape(5, Direction::AliceToBob), Some(Shape::FinalA));
        assert_eq!(l.shape(5, Direction::BobToAlice), None);
        assert_eq!(l.shape(0, Direction::AliceToBob), None);
        let two = WireLayout {
            flavor: Flavor::TwoRound,
            phases: 1,
            ..l
        };
        assert_eq!(all_positions(&two).len(), 2);
        assert_eq!(all_positions(&l).len(), 9);
    }

    #[test]
    fn round_trip_every_shape() {
        let l = layout();
        for (p, d) in all_positions(&l) {
            let m = filled(&l, p, d, 0x0123_4567_89ab_cdef_fedc_ba98_7654_3210);
            l.validate(&m).unwrap();
            assert_eq!(decode_message(&encode_message(&m), &l, p).unwrap(), m);
        }
    }

    #[test]
    fn decode_rejects() {
        let l = layout();
        let m = filled(&l, 2, Direction::BobToAlice, 77);
        let bytes = encode_message(&m);
        for cut in 0..bytes.len() {
            assert!(decode_message(&bytes[..cut], &l, 2).is_err(), "cut={cut}");
        }
        let mut longer = bytes.clone();
        longer.push(0);
        assert_eq!(decode_message(&longer, &l, 2), Err(WireError::Trailing(1)));
        assert!(matches!(decode_message(&bytes, &l, 3), Err(WireError::Phase { .. })));
        let mut bad_dir = bytes.clone();
        bad_dir[1] = 7;
        assert_eq!(decode_message(&bad_dir, &l, 2), Err(WireError::Direction(7)));
        // a 96-bit W declared as 95 bits
        let mut bad_len = bytes.clone();
        bad_len[3] = 95;
        assert!(matches!(decode_message(&bad_len, &l, 2), Err(WireError::Length { .. })));
        // padding bits above the declared length
        let short = filled(&l, 1, Direction::AliceToBob, 1);
        let mut padded = encode_message(&short);
        let last = padded.len() - 1;
        padded[last] |= 0x80;
        assert_eq!(decode_message(&padded, &l, 1), Err(WireError::Value("y")));
    }

    #[test]
    fn validate_catches_wrong_shape_and_width() {
        let l = layout();
        let mut m = filled(&l, 2, Direction::AliceToBob, 5);
        m.phase = 1;
        assert!(l.validate(&m).is_err());
        let m = Message::new(
            1,
            Direction::AliceToBob,
            Payload::P1A {
                y: BitString::zeros(32).unwrap(),
            },
        );
        assert!(matches!(l.validate(&m), Err(WireError::Length { field: "y", .. })));
    }

    #[test]
    fn json_form() {
        let m = Message::new(
            1,
            Direction::AliceToBob,
            Payload::P1A {
                y: BitString::new(5, 4).unwrap(),
            },
        );
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"phase":1,"direction":"AliceToBob","payload":{"kind":"p1_a","y":"4:5"}}"#);
        assert_eq!(serde_json::from_str::<Message>(&s).unwrap(), m);
    }

    proptest! {
        #[test]
        fn round_trip_random(seed: u128, idx in 0usize..9) {
            let l = layout();
            let (p, d) = all_positions(&l)[idx];
            let m = filled(&l, p, d, seed);
            prop_assert_eq!(decode_message(&encode_message(&m), &l, p).unwrap(), m);
        }
    }
}
