//! One-time polynomial MAC over `GF(2^v)`: `tag = b + sum_i w_i a^i`, keyed by
//! `(a, b)`, plus exact forgery-probability oracles for small parameters.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{BitString, BitsError};
use crate::ff::{FfError, Gf2Ctx, GF2_MAX_DEGREE};

/// Largest `(v, d)` accepted by [`mac_max_forgery`].
pub const MAX_FORGERY_V: u32 = 8;
pub const MAX_FORGERY_D: u32 = 16;
/// Largest `(v, d)` accepted by [`mac_forgery_with_leakage`].
pub const MAX_LEAKAGE_V: u32 = 4;
pub const MAX_LEAKAGE_D: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MacError {
    #[error("tag length v={0} outside 1..={GF2_MAX_DEGREE}")]
    TagLength(u32),
    #[error("key has {got} bits, expected {expected}")]
    KeyLength { got: u32, expected: u32 },
    #[error("message has {got} bits, at most {max} allowed")]
    MessageLength { got: u32, max: u32 },
    #[error("tag has {got} bits, expected {expected}")]
    TagMismatch { got: u32, expected: u32 },
    #[error("exhaustive range exceeded: v={v}, d={d}")]
    RangeCap { v: u32, d: u32 },
    #[error("leakage table has {got} entries, expected {expected}")]
    LeakageTable { got: usize, expected: usize },
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error(transparent)]
    Field(#[from] FfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacParams {
    /// Tag length.
    pub v: u32,
    /// Maximum message length.
    pub d: u32,
}

impl MacParams {
    pub fn new(v: u32, d: u32) -> Result<Self, MacError> {
        if v == 0 || v > GF2_MAX_DEGREE {
            return Err(MacError::TagLength(v));
        }
        Ok(MacParams { v, d })
    }

    /// `ceil(d / v)`.
    pub fn chunks(&self) -> u32 {
        self.d.div_ceil(self.v)
    }

    pub fn key_len(&self) -> u32 {
        2 * self.v
    }

    /// `ceil(d/v) * 2^-v`.
    pub fn bound(&self) -> BigRational {
        BigRational::new(BigInt::from(self.chunks()), BigInt::from(1) << self.v)
    }
}

#[inline]
fn mask(v: u32) -> u128 {
    if v >= 128 {
        u128::MAX
    } else {
        (1u128 << v) - 1
    }
}

/// Chunk `i` (0-based) of `msg || 1 || 0...`.
fn padded_chunk(msg: &BitString, i: u32, v: u32) -> u128 {
    let start = i * v;
    let len = msg.len();
    let mut chunk = 0u128;
    if start < len {
        chunk = (msg.value() >> start) & mask(v.min(len - start));
    }
    if (start..start + v).contains(&len) {
        chunk |= 1u128 << (len - start);
    }
    chunk
}

/// `MAC` with fixed parameters and a cached field.
#[derive(Debug, Clone)]
pub struct Mac {
    params: MacParams,
    field: Gf2Ctx,
}

impl Mac {
    pub fn new(params: MacParams) -> Result<Self, MacError> {
        Ok(Mac {
            params,
            field: Gf2Ctx::new(params.v)?,
        })
    }

    pub fn params(&self) -> MacParams {
        self.params
    }

    pub fn field(&self) -> &Gf2Ctx {
        &self.field
    }

    /// Key bits `1..=v` give `a`, bits `v+1..=2v` give `b`.
    pub fn split_key(&self, key: &BitString) -> Result<(u128, u128), MacError> {
        let v = self.params.v;
        if key.len() != 2 * v {
            return Err(MacError::KeyLength {
                got: key.len(),
                expected: 2 * v,
            });
        }
        Ok((key.slice(1, v)?.value(), key.slice(v + 1, 2 * v)?.value()))
    }

    fn eval(&self, a: u128, b: u128, msg: &BitString) -> u128 {
        let v = self.params.v;
        let count = (msg.len() + 1).div_ceil(v);
        // Horner from the top chunk: acc = (acc + w_i) * a
        let mut acc = 0u128;
        for i in (0..count).rev() {
            acc = self.field.mul(acc ^ padded_chunk(msg, i, v), a);
        }
        acc ^ b
    }

    pub fn tag(&self, key: &BitString, msg: &BitString) -> Result<BitString, MacError> {
        let (a, b) = self.split_key(key)?;
        if msg.len() > self.params.d {
            return Err(MacError::MessageLength {
                got: msg.len(),
                max: self.params.d,
            });
        }
        Ok(BitString::new(self.eval(a, b, msg), self.params.v)?)
    }

    pub fn verify(&self, key: &BitString, msg: &BitString, tag: &BitString) -> Result<bool, MacError> {
        if tag.len() != self.params.v {
            return Err(MacError::TagMismatch {
                got: tag.len(),
                expected: self.params.v,
            });
        }
        Ok(self.tag(key, msg)? == *tag)
    }
}

pub fn mac_tag(key: &BitString, msg: &BitString, params: MacParams) -> Result<BitString, MacError> {
    Mac::new(params)?.tag(key, msg)
}

pub fn mac_verify(
    key: &BitString,
    msg: &BitString,
    tag: &BitString,
    params: MacParams,
) -> Result<bool, MacError> {
    Mac::new(params)?.verify(key, msg, tag)
}

/// Exact best one-time forgery probability over `d`-bit messages.
///
/// For a fixed message pair the padding chunk cancels, so the forger wins on
/// key `(a, b)` iff `P(a) = D` for the difference polynomial `P` of the two
/// messages and the tag difference `D` it commits to. `b` is uniform and
/// independent of `a`, so the optimum is `max_{P, D} #{a : P(a) = D} / 2^v`.
pub fn mac_max_forgery(params: MacParams) -> Result<BigRational, MacError> {
    let MacParams { v, d } = params;
    if v > MAX_FORGERY_V || d > MAX_FORGERY_D {
        return Err(MacError::RangeCap { v, d });
    }
    if d == 0 {
        return Ok(BigRational::zero());
    }
    let field = Gf2Ctx::new(v)?;
    let chunks = params.chunks();
    let size = 1usize << v;
    let mut best = 0u32;
    let mut counts = vec![0u32; size];
    for delta in 1u128..(1 << d) {
        counts.iter_mut().for_each(|c| *c = 0);
        for a in 0..size as u128 {
            let mut acc = 0u128;
            for i in (0..chunks).rev() {
                acc = field.mul(acc ^ ((delta >> (i * v)) & mask(v)), a);
            }
            counts[acc as usize] += 1;
        }
        best = best.max(*counts.iter().max().unwrap_or(&0));
    }
    Ok(BigRational::new(BigInt::from(best), BigInt::from(size)))
}

/// Exact optimal forgery probability against an adversary who sees
/// `leak[key]` before choosing the message, then the tag, over `d`-bit
/// messages and a uniform key. Brute force over every key, message pair, and
/// tag; the key index is `a | b << v`.
pub fn mac_forgery_with_leakage(params: MacParams, leak: &[u32]) -> Result<BigRational, MacError> {
    let MacParams { v, d } = params;
    if v > MAX_LEAKAGE_V || d > MAX_LEAKAGE_D {
        return Err(MacError::RangeCap { v, d });
    }
    let keys = 1usize << (2 * v);
    if leak.len() != keys {
        return Err(MacError::LeakageTable {
            got: leak.len(),
            expected: keys,
        });
    }
    if d == 0 {
        return Ok(BigRational::zero());
    }
    let mac = Mac::new(params)?;
    let msgs = 1usize << d;
    let tags_n = 1usize << v;
    let tags: Vec<Vec<u8>> = (0..keys)
        .map(|k| {
            let a = (k as u128) & mask(v);
            let b = (k as u128) >> v;
            (0..msgs)
                .map(|w| mac.eval(a, b, &BitString::new(w as u128, d).expect("fits")) as u8)
                .collect()
        })
        .collect();
    let mut classes: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (k, &e) in leak.iter().enumerate() {
        classes.entry(e).or_default().push(k);
    }
    let mut wins = 0u64;
    let mut counts = vec![0u32; tags_n * msgs * tags_n];
    for members in classes.values() {
        let mut best_w = 0u64;
        for w in 0..msgs {
            counts.iter_mut().for_each(|c| *c = 0);
            for &k in members {
                let t = tags[k][w] as usize;
                for (w2, &t2) in tags[k].iter().enumerate() {
                    if w2 != w {
                        counts[(t * msgs + w2) * tags_n + t2 as usize] += 1;
                    }
                }
            }
            let total: u64 = counts
                .chunks(msgs * tags_n)
                .map(|per_tag| *per_tag.iter().max().unwrap_or(&0) as u64)
                .sum();
            best_w = best_w.max(total);
        }
        wins += best_w;
    }
    Ok(BigRational::new(BigInt::from(wins), BigInt::from(keys)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bs(value: u128, len: u32) -> BitString {
        BitString::new(value, len).unwrap()
    }

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn tag_examples() {
        let p = MacParams::new(2, 8).unwrap();
        let mac = Mac::new(p).unwrap();
        assert_eq!(mac.field().poly(), 0b111);
        // zero key
        for w in [0u128, 1, 0xab] {
            assert_eq!(mac.tag(&bs(0, 4), &bs(w, 8)).unwrap(), bs(0, 2));
        }
        // a = z, b = 1; message 11 pads to chunks (z+1, 1)
        let key = bs(0b01_10, 4);
        assert_eq!(mac.tag(&key, &bs(0b11, 2)).unwrap().bits(), vec![1, 1]);
        // empty message: the lone padding chunk is 1, so tag = b + a
        assert_eq!(mac.tag(&key, &BitString::empty()).unwrap(), bs(0b11, 2));
        let key_b_only = bs(0b10_00, 4);
        assert_eq!(mac.tag(&key_b_only, &BitString::empty()).unwrap(), bs(0b10, 2));
    }

    #[test]
    fn tag_matches_power_sum() {
        // independent evaluation of b + sum w_i a^i
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for v in [1u32, 3, 5, 8, 15, 30] {
            let d = 64;
            let mac = Mac::new(MacParams::new(v, d).unwrap()).unwrap();
            let f = *mac.field();
            for _ in 0..50 {
                let key = BitString::random(2 * v, &mut rng).unwrap();
                let len = rng.gen_range(0..=d);
                let msg = BitString::random(len, &mut rng).unwrap();
                let (a, b) = mac.split_key(&key).unwrap();
                let bits: Vec<u8> = msg.bits().into_iter().chain([1]).collect();
                let mut expect = b;
                for (i, chunk) in bits.chunks(v as usize).enumerate() {
                    let w = chunk.iter().enumerate().fold(0u128, |acc, (j, &bit)| acc | (u128::from(bit) << j));
                    expect ^= f.mul(w, f.pow(a, i as u128 + 1));
                }
                assert_eq!(mac.tag(&key, &msg).unwrap().value(), expect);
            }
        }
    }

    #[test]
    fn verify_behaviour() {
        let p = MacParams::new(4, 8).unwrap();
        let key = bs(0x5c, 8);
        let msg = bs(0x3a, 8);
        let tag = mac_tag(&key, &msg, p).unwrap();
        assert!(mac_verify(&key, &msg, &tag, p).unwrap());
        assert!(!mac_verify(&key, &msg, &tag.flip(2).unwrap(), p).unwrap());
        assert!(mac_verify(&key, &msg, &bs(0, 3), p).is_err());
        assert!(mac_tag(&bs(0, 7), &msg, p).is_err());
        assert!(mac_tag(&key, &bs(0, 9), p).is_err());
        assert!(MacParams::new(0, 8).is_err());
    }

    #[test]
    fn affine_in_b() {
        let p = MacParams::new(4, 8).unwrap();
        let mac = Mac::new(p).unwrap();
        for a in 0..16u128 {
            for (b1, b2) in [(0u128, 5u128), (3, 12), (7, 8)] {
                let k1 = bs(a | b1 << 4, 8);
                let k2 = bs(a | b2 << 4, 8);
                for w in 0..256 {
                    let t1 = mac.tag(&k1, &bs(w, 8)).unwrap().value();
                    let t2 = mac.tag(&k2, &bs(w, 8)).unwrap().value();
                    assert_eq!(t1 ^ t2, b1 ^ b2);
                }
            }
        }
    }

    #[test]
    fn max_forgery_examples() {
        let p48 = MacParams::new(4, 8).unwrap();
        let f = mac_max_forgery(p48).unwrap();
        assert!(f <= ratio(2, 16), "{f}");
        assert!(mac_max_forgery(MacParams::new(2, 2).unwrap()).unwrap() <= ratio(1, 4));
        assert!(mac_max_forgery(MacParams::new(3, 0).unwrap()).unwrap().is_zero());
        assert!(mac_max_forgery(MacParams::new(9, 8).unwrap()).is_err());
        assert!(mac_max_forgery(MacParams::new(4, 17).unwrap()).is_err());
    }

    #[test]
    fn closed_form_matches_brute_force() {
        for v in 1..=3u32 {
            for d in 0..=6u32 {
                let p = MacParams::new(v, d).unwrap();
                let brute = mac_forgery_with_leakage(p, &vec![0; 1 << (2 * v)]).unwrap();
                assert_eq!(brute, mac_max_forgery(p).unwrap(), "v={v} d={d}");
            }
        }
    }

    #[test]
    fn exhaustive_one_time_security() {
        // every pair w != w', every tag guess, counted over all keys
        for v in 1..=4u32 {
            for d in [1u32, 3, 4, 6, 8] {
                let p = MacParams::new(v, d).unwrap();
                let mac = Mac::new(p).unwrap();
                let keys = 1u128 << (2 * v);
                let bound = p.bound();
                let table: Vec<Vec<u128>> = (0..keys)
                    .map(|k| (0..1u128 << d).map(|w| mac.tag(&bs(k, 2 * v), &bs(w, d)).unwrap().value()).collect())
                    .collect();
                for w in 0..(1usize << d) {
                    for w2 in (0..(1usize << d)).filter(|&w2| w2 != w) {
                        // joint counts of (tag(w), tag(w2))
                        let mut joint = vec![0u64; 1 << (2 * v)];
                        for row in &table {
                            joint[(row[w] << v | row[w2]) as usize] += 1;
                        }
                        let worst = *joint.iter().max().unwrap();
                        // conditioned on the observed tag, the best guess wins
                        // worst / (keys / 2^v) of the time
                        let p_win = BigRational::new((worst << v).into(), (keys as u64).into());
                        assert!(p_win <= bound, "v={v} d={d}");
                    }
                }
            }
        }
    }

    #[test]
    fn leakage_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for v in [2u32, 4] {
            let d = 2 * v;
            let p = MacParams::new(v, d).unwrap();
            let keys = 1usize << (2 * v);
            let range = 1u32 << (v / 2);
            let mut leaks: Vec<Vec<u32>> = (0..3)
                .map(|_| (0..keys).map(|_| rng.gen_range(0..range)).collect())
                .collect();
            leaks.push((0..keys).map(|k| (k as u32) % range).collect());
            leaks.push((0..keys).map(|k| ((k >> v) as u32) % range).collect());
            for leak in leaks {
                let win = mac_forgery_with_leakage(p, &leak).unwrap();
                // uniform key: guessing probability given the leak is
                // (#distinct leak values) / #keys
                let mut seen: Vec<u32> = leak.clone();
                seen.sort_unstable();
                seen.dedup();
                // ceil(d/v) * 2^v * 2^-H
                let guess = BigRational::new(seen.len().into(), keys.into());
                let bound = BigRational::from_integer(((p.chunks() as u64) << v).into()) * guess;
                assert!(win <= bound, "v={v}: {win} > {bound}");
            }
        }
    }
}
