//! The character-sum non-malleable extractor and a strong seeded extractor
//! built from binary-field multiplication.

mod bits;

pub use bits::{BitString, BitsError, MAX_BITS};

use thiserror::Error;

use crate::dlog::{dlog_brute, dlog_pow2, euler_char, pohlig_hellman_pow2, DlogError};
use crate::ff::{FfError, FieldCtx, Gf2Ctx};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error(transparent)]
    Dlog(#[from] DlogError),
    #[error(transparent)]
    Field(#[from] FfError),
    #[error("input lengths differ: {x} and {w} bits, field has {n}")]
    LengthMismatch { x: u32, w: u32, n: u32 },
    #[error("output length {m} exceeds field degree {n}")]
    OutputTooLong { m: u32, n: u32 },
    #[error("M={big_m} must be a power of two below q={q}")]
    BadModulus { big_m: u64, q: u64 },
}

/// One-bit extractor: the quadratic character of `x+y` mapped `+1 -> 0`,
/// `-1 -> 1`, with `0 -> 0`. `q` must be an odd prime.
#[inline]
pub fn nmext_bit(x: u64, y: u64, q: u64) -> u8 {
    debug_assert!(q % 2 == 1);
    let z = ((x as u128 + y as u128) % q as u128) as u64;
    euler_char(z, q).to_bit()
}

/// `log_g(x+y) mod 2^m` as an `m`-bit string; all zeros when `x+y = 0`.
/// Inputs are reduced modulo `q`.
pub fn nmext(x: u64, y: u64, ctx: &FieldCtx) -> Result<BitString, ExtractError> {
    let z = ctx.add(x % ctx.q(), y % ctx.q());
    if z == 0 {
        return Ok(BitString::zeros(ctx.m())?);
    }
    let e = dlog_pow2(z, ctx)?;
    Ok(BitString::new(e as u128, ctx.m())?)
}

/// `log_g(x+y) mod M` for any power of two `M < q`, including `M` not
/// dividing `q-1`. Zero sum maps to 0.
pub fn nmext_general_m(x: u64, y: u64, ctx: &FieldCtx, big_m: u64) -> Result<u64, ExtractError> {
    let q = ctx.q();
    if !big_m.is_power_of_two() || big_m >= q {
        return Err(ExtractError::BadModulus { big_m, q });
    }
    let z = ctx.add(x % q, y % q);
    if z == 0 || big_m == 1 {
        return Ok(0);
    }
    if (q - 1).is_multiple_of(big_m) {
        return Ok(pohlig_hellman_pow2(z, q, ctx.g(), big_m.trailing_zeros()));
    }
    Ok(dlog_brute(z, ctx)? % big_m)
}

/// Strong extractor `(x, w) -> low bits of x*w` in `GF(2^n)`.
#[derive(Debug, Clone)]
pub struct StrongExtractor {
    field: Gf2Ctx,
}

impl StrongExtractor {
    pub fn new(n: u32) -> Result<Self, ExtractError> {
        Ok(StrongExtractor {
            field: Gf2Ctx::new(n)?,
        })
    }

    pub fn n(&self) -> u32 {
        self.field.degree()
    }

    pub fn field(&self) -> &Gf2Ctx {
        &self.field
    }

    /// The full `n`-bit product.
    pub fn product(&self, x: &BitString, w: &BitString) -> Result<BitString, ExtractError> {
        let n = self.n();
        if x.len() != n || w.len() != n {
            return Err(ExtractError::LengthMismatch {
                x: x.len(),
                w: w.len(),
                n,
            });
        }
        Ok(BitString::new(self.field.mul(x.value(), w.value()), n)?)
    }

    /// Positions `1..=m` of the product.
    pub fn extract(&self, x: &BitString, w: &BitString, m: u32) -> Result<BitString, ExtractError> {
        if m > self.n() {
            return Err(ExtractError::OutputTooLong { m, n: self.n() });
        }
        if m == 0 {
            self.product(x, w)?;
            return Ok(BitString::empty());
        }
        Ok(self.product(x, w)?.slice(1, m)?)
    }

    /// Positions `a..=b` of the product.
    pub fn range(&self, x: &BitString, w: &BitString, a: u32, b: u32) -> Result<BitString, ExtractError> {
        Ok(self.product(x, w)?.slice(a, b)?)
    }
}

/// One-shot form of [`StrongExtractor::extract`] with `n = |x|`.
pub fn strong_ext(x: &BitString, w: &BitString, m: u32) -> Result<BitString, ExtractError> {
    StrongExtractor::new(x.len())?.extract(x, w, m)
}

/// One-shot form of [`StrongExtractor::range`] with `n = |x|`.
pub fn ext_range(x: &BitString, w: &BitString, a: u32, b: u32) -> Result<BitString, ExtractError> {
    StrongExtractor::new(x.len())?.range(x, w, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlog::{quad_char, CharValue};
    use crate::ff::is_prime;
    use proptest::prelude::*;

    fn bs(value: u128, len: u32) -> BitString {
        BitString::new(value, len).unwrap()
    }

    #[test]
    fn nmext_bit_examples() {
        assert_eq!(nmext_bit(1, 1, 7), 0);
        assert_eq!(nmext_bit(1, 2, 7), 1);
        assert_eq!(nmext_bit(3, 4, 7), 0);
    }

    #[test]
    fn nmext_examples() {
        let ctx = FieldCtx::dlog_mode(17, 2).unwrap();
        assert_eq!(nmext(2, 3, &ctx).unwrap(), bs(1, 2));
        assert_eq!(nmext(0, 1, &ctx).unwrap(), bs(0, 2));
        assert_eq!(nmext(16, 1, &ctx).unwrap(), bs(0, 2));
        let not_dlog = FieldCtx::new(7, 2).unwrap();
        assert!(nmext(1, 1, &not_dlog).is_err());
    }

    #[test]
    fn general_m_examples() {
        let ctx = FieldCtx::new(7, 2).unwrap();
        assert_eq!(ctx.g(), 3);
        assert_eq!(nmext_general_m(1, 1, &ctx, 4).unwrap(), 2);
        assert_eq!(nmext_general_m(2, 3, &ctx, 4).unwrap(), 1);
        for big_m in [1u64, 2, 4] {
            assert_eq!(nmext_general_m(0, 1, &ctx, big_m).unwrap(), 0);
        }
        assert!(nmext_general_m(1, 1, &ctx, 3).is_err());
        assert!(nmext_general_m(1, 1, &ctx, 8).is_err());
    }

    #[test]
    fn general_m_matches_dlog_mode_when_m_divides() {
        let ctx = FieldCtx::dlog_mode(97, 5).unwrap();
        for x in 0..97 {
            let a = nmext(x, 5, &ctx).unwrap().value() as u64;
            assert_eq!(nmext_general_m(x, 5, &ctx, 32).unwrap(), a);
        }
    }

    #[test]
    fn low_bit_is_character_bit() {
        for q in (3..=257u64).filter(|&q| is_prime(q)) {
            for m in 1..=(q - 1).trailing_zeros() {
                let ctx = FieldCtx::dlog_mode(q, m).unwrap();
                for z in 1..q {
                    let low = (nmext(z, 0, &ctx).unwrap().value() & 1) as u8;
                    let chi = quad_char(z, q).unwrap();
                    assert_eq!(low, chi.to_bit(), "q={q} m={m} z={z}");
                    assert_eq!(low, nmext_bit(z, 0, q));
                }
            }
        }
    }

    #[test]
    fn output_multiset_independent_of_seed() {
        for q in (3..=101u64).filter(|&q| is_prime(q)) {
            let m = (q - 1).trailing_zeros().min(3);
            let ctx = FieldCtx::dlog_mode(q, m).unwrap();
            let histogram = |y: u64| {
                let mut h = vec![0u32; 1 << m];
                for x in 0..q {
                    h[nmext(x, y, &ctx).unwrap().value() as usize] += 1;
                }
                h
            };
            let base = histogram(0);
            for y in 1..q {
                assert_eq!(histogram(y), base);
            }
        }
    }

    #[test]
    fn designated_zero_is_all_zero() {
        let ctx = FieldCtx::dlog_mode(97, 5).unwrap();
        assert_eq!(nmext(40, 57, &ctx).unwrap(), bs(0, 5));
        assert_eq!(quad_char(0, 97).unwrap(), CharValue::Zero);
    }

    #[test]
    fn strong_ext_examples() {
        let x = bs(0b011, 3);
        assert_eq!(strong_ext(&x, &x, 2).unwrap().bits(), vec![1, 0]);
        assert_eq!(ext_range(&x, &x, 3, 3).unwrap().bits(), vec![1]);
        assert_eq!(strong_ext(&bs(0, 8), &bs(0xa7, 8), 8).unwrap(), bs(0, 8));
        assert_eq!(
            ext_range(&x, &x, 1, 2).unwrap(),
            strong_ext(&x, &x, 2).unwrap()
        );
        assert!(strong_ext(&x, &bs(1, 4), 2).is_err());
        assert!(strong_ext(&x, &x, 4).is_err());
        assert!(ext_range(&x, &x, 2, 4).is_err());
    }

    #[test]
    fn nonzero_seed_gives_uniform_truncation() {
        let ext = StrongExtractor::new(8).unwrap();
        for w in [1u128, 0x53, 0xff] {
            let mut counts = [0u32; 8];
            for x in 0..256 {
                let out = ext.extract(&bs(x, 8), &bs(w, 8), 3).unwrap();
                counts[out.value() as usize] += 1;
            }
            assert!(counts.iter().all(|&c| c == 32));
        }
    }

    #[test]
    fn universal_family_pairs() {
        // direct pairwise enumeration
        for n in 1..=7u32 {
            let ext = StrongExtractor::new(n).unwrap();
            let size = 1u128 << n;
            for m in 1..=n {
                for x in 0..size {
                    for x2 in (x + 1)..size {
                        let collisions = (0..size)
                            .filter(|&w| {
                                ext.extract(&bs(x, n), &bs(w, n), m).unwrap()
                                    == ext.extract(&bs(x2, n), &bs(w, n), m).unwrap()
                            })
                            .count() as u128;
                        assert!(collisions << m <= size, "n={n} m={m}");
                    }
                }
            }
        }
    }

    #[test]
    fn universal_family_by_difference() {
        // x, x' collide under w exactly when the low m bits of (x^x')*w vanish
        for n in 8..=10u32 {
            let ext = StrongExtractor::new(n).unwrap();
            let size = 1u128 << n;
            for m in [1, n / 2, n] {
                for delta in 1..size {
                    let zeros = (0..size)
                        .filter(|&w| ext.field().mul(delta, w) & ((1 << m) - 1) == 0)
                        .count() as u128;
                    assert!(zeros << m <= size, "n={n} m={m} delta={delta}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn ranges_partition_product(n in 2u32..=96, x: u128, w: u128, cuts in proptest::collection::vec(1u32..96, 0..5)) {
            let ext = StrongExtractor::new(n).unwrap();
            let x = BitString::truncated(x, n).unwrap();
            let w = BitString::truncated(w, n).unwrap();
            let mut bounds: Vec<u32> = cuts.into_iter().map(|c| 1 + c % (n - 1)).collect();
            bounds.sort_unstable();
            bounds.dedup();
            let mut acc = BitString::empty();
            let mut start = 1;
            for end in bounds.into_iter().chain(std::iter::once(n)) {
                if end < start {
                    continue;
                }
                acc = acc.concat(&ext.range(&x, &w, start, end).unwrap()).unwrap();
                start = end + 1;
            }
            prop_assert_eq!(acc, ext.product(&x, &w).unwrap());
        }
    }
}
