use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Widest supported bit string.
pub const MAX_BITS: u32 = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitsError {
    #[error("bit length {0} exceeds {MAX_BITS}")]
    TooLong(u32),
    #[error("value does not fit in {len} bits")]
    ValueTooWide { len: u32 },
    #[error("positions {a}..{b} are outside 1..{len}")]
    Range { a: u32, b: u32, len: u32 },
    #[error("malformed bit string {0:?}")]
    Parse(String),
}

/// Bit string of at most 128 bits. Position 1 is the least-significant
/// coefficient of the integer (or binary polynomial) encoding.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: u32,
    value: u128,
}

#[inline]
fn low_mask(len: u32) -> u128 {
    if len >= 128 {
        u128::MAX
    } else {
        (1u128 << len) - 1
    }
}

impl BitString {
    pub fn new(value: u128, len: u32) -> Result<Self, BitsError> {
        if len > MAX_BITS {
            return Err(BitsError::TooLong(len));
        }
        if value & !low_mask(len) != 0 {
            return Err(BitsError::ValueTooWide { len });
        }
        Ok(BitString { len, value })
    }

    /// Keeps only the low `len` bits of `value`.
    pub fn truncated(value: u128, len: u32) -> Result<Self, BitsError> {
        Self::new(value & low_mask(len), len)
    }

    pub fn zeros(len: u32) -> Result<Self, BitsError> {
        Self::new(0, len)
    }

    pub fn empty() -> Self {
        BitString { len: 0, value: 0 }
    }

    /// Builds from bits listed from position 1 upward.
    pub fn from_bits(bits: &[u8]) -> Result<Self, BitsError> {
        let len = u32::try_from(bits.len()).map_err(|_| BitsError::TooLong(u32::MAX))?;
        if len > MAX_BITS {
            return Err(BitsError::TooLong(len));
        }
        let value = bits
            .iter()
            .enumerate()
            .fold(0u128, |acc, (i, &b)| acc | (u128::from(b & 1) << i));
        Ok(BitString { len, value })
    }

    pub fn random<R: Rng + ?Sized>(len: u32, rng: &mut R) -> Result<Self, BitsError> {
        Self::truncated(rng.gen::<u128>(), len)
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn value(&self) -> u128 {
        self.value
    }

    /// Bits from position 1 upward.
    pub fn bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| ((self.value >> i) & 1) as u8).collect()
    }

    pub fn bit(&self, pos: u32) -> Result<u8, BitsError> {
        if pos == 0 || pos > self.len {
            return Err(BitsError::Range {
                a: pos,
                b: pos,
                len: self.len,
            });
        }
        Ok(((self.value >> (pos - 1)) & 1) as u8)
    }

    /// Positions `a..=b`, 1-indexed.
    pub fn slice(&self, a: u32, b: u32) -> Result<Self, BitsError> {
        if a == 0 || a > b || b > self.len {
            return Err(BitsError::Range { a, b, len: self.len });
        }
        let len = b - a + 1;
        Ok(BitString {
            len,
            value: (self.value >> (a - 1)) & low_mask(len),
        })
    }

    /// `self` occupies the low positions, `high` the ones above it.
    pub fn concat(&self, high: &BitString) -> Result<Self, BitsError> {
        let len = self.len + high.len;
        if len > MAX_BITS {
            return Err(BitsError::TooLong(len));
        }
        let shifted = if high.len == 0 { 0 } else { high.value << self.len };
        Ok(BitString {
            len,
            value: self.value | shifted,
        })
    }

    pub fn flip(&self, pos: u32) -> Result<Self, BitsError> {
        self.bit(pos)?;
        Ok(BitString {
            len: self.len,
            value: self.value ^ (1u128 << (pos - 1)),
        })
    }

    /// `ceil(len/8)` bytes; byte `i` carries positions `8i+1..8i+8`, lowest first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len.div_ceil(8) as usize;
        self.value.to_le_bytes()[..n].to_vec()
    }

    pub fn from_bytes(bytes: &[u8], len: u32) -> Result<Self, BitsError> {
        if len > MAX_BITS {
            return Err(BitsError::TooLong(len));
        }
        if bytes.len() != len.div_ceil(8) as usize {
            return Err(BitsError::ValueTooWide { len });
        }
        let mut buf = [0u8; 16];
        buf[..bytes.len()].copy_from_slice(bytes);
        Self::new(u128::from_le_bytes(buf), len)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.len.div_ceil(4) as usize;
        if width == 0 {
            write!(f, "0:")
        } else {
            write!(f, "{}:{:0width$x}", self.len, self.value)
        }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BitsError::Parse(s.to_string());
        let (len, hex) = s.split_once(':').ok_or_else(bad)?;
        let len: u32 = len.parse().map_err(|_| bad())?;
        let value = if hex.is_empty() {
            0
        } else {
            u128::from_str_radix(hex, 16).map_err(|_| bad())?
        };
        Self::new(value, len)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn positions_are_lsb_first() {
        let b = BitString::new(0b110, 3).unwrap();
        assert_eq!(b.bits(), vec![0, 1, 1]);
        assert_eq!(b.bit(1).unwrap(), 0);
        assert_eq!(b.bit(3).unwrap(), 1);
        assert!(b.bit(0).is_err());
        assert!(b.bit(4).is_err());
        assert_eq!(BitString::from_bits(&[0, 1, 1]).unwrap(), b);
    }

    #[test]
    fn rejects_wide_values() {
        assert!(BitString::new(8, 3).is_err());
        assert!(BitString::new(0, 129).is_err());
        assert!(BitString::new(u128::MAX, 128).is_ok());
    }

    #[test]
    fn text_form() {
        let b = BitString::new(0x1f, 5).unwrap();
        assert_eq!(b.to_string(), "5:1f");
        assert_eq!(BitString::new(1, 9).unwrap().to_string(), "9:001");
        assert_eq!(BitString::empty().to_string(), "0:");
        assert_eq!("0:".parse::<BitString>().unwrap(), BitString::empty());
        assert!("3:f".parse::<BitString>().is_err());
        assert!("x".parse::<BitString>().is_err());
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, "\"5:1f\"");
        assert_eq!(serde_json::from_str::<BitString>(&json).unwrap(), b);
    }

    #[test]
    fn slice_and_concat() {
        let b = BitString::new(0b1011_0110, 8).unwrap();
        assert_eq!(b.slice(2, 4).unwrap(), BitString::new(0b011, 3).unwrap());
        assert!(b.slice(0, 1).is_err());
        assert!(b.slice(3, 2).is_err());
        assert!(b.slice(1, 9).is_err());
        let lo = b.slice(1, 3).unwrap();
        let hi = b.slice(4, 8).unwrap();
        assert_eq!(lo.concat(&hi).unwrap(), b);
        assert_eq!(BitString::empty().concat(&b).unwrap(), b);
    }

    proptest! {
        #[test]
        fn bytes_round_trip(value: u128, len in 0u32..=128) {
            let b = BitString::truncated(value, len).unwrap();
            prop_assert_eq!(b.to_bytes().len(), len.div_ceil(8) as usize);
            prop_assert_eq!(BitString::from_bytes(&b.to_bytes(), len).unwrap(), b);
            prop_assert_eq!(b.to_string().parse::<BitString>().unwrap(), b);
        }

        #[test]
        fn split_reconstructs(value: u128, len in 2u32..=128, cut in 1u32..128) {
            let b = BitString::truncated(value, len).unwrap();
            let cut = 1 + cut % (len - 1);
            let lo = b.slice(1, cut).unwrap();
            let hi = b.slice(cut + 1, len).unwrap();
            prop_assert_eq!(lo.concat(&hi).unwrap(), b);
        }
    }
}
