//! Quadratic character and discrete logarithms modulo `2^m`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ff::{is_prime, mul_mod, pow_mod, FfError, FieldCtx};

/// Largest modulus accepted by the linear-scan oracle.
pub const BRUTE_FORCE_CAP: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DlogError {
    #[error("logarithm of zero is undefined")]
    Zero,
    #[error("{z} is not a field element modulo {q}")]
    OutOfField { z: u64, q: u64 },
    #[error("field context is not in discrete-log mode (2^m does not divide q-1)")]
    NotDlogMode,
    #[error("q={q} exceeds the brute-force oracle range {cap}")]
    BruteRange { q: u64, cap: u64 },
    #[error(transparent)]
    Field(#[from] FfError),
}

/// Value of the quadratic character, extended by `chi(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CharValue {
    Minus,
    Zero,
    Plus,
}

impl CharValue {
    pub fn value(self) -> i8 {
        match self {
            CharValue::Minus => -1,
            CharValue::Zero => 0,
            CharValue::Plus => 1,
        }
    }

    /// `+1 -> 0`, `-1 -> 1`, and the designated `0 -> 0`.
    pub fn to_bit(self) -> u8 {
        u8::from(self == CharValue::Minus)
    }
}

/// Euler's criterion without validating `q`. Callers must pass an odd prime.
#[inline]
pub fn euler_char(z: u64, q: u64) -> CharValue {
    let z = z % q;
    if z == 0 {
        return CharValue::Zero;
    }
    if pow_mod(z, (q - 1) / 2, q) == 1 {
        CharValue::Plus
    } else {
        CharValue::Minus
    }
}

/// Quadratic character of `z` modulo the odd prime `q`.
pub fn quad_char(z: u64, q: u64) -> Result<CharValue, DlogError> {
    if q.is_multiple_of(2) {
        return Err(FfError::EvenModulus(q).into());
    }
    if !is_prime(q) {
        return Err(FfError::NotPrime(q).into());
    }
    if z >= q {
        return Err(DlogError::OutOfField { z, q });
    }
    Ok(euler_char(z, q))
}

/// Pohlig-Hellman restricted to the subgroup of order `2^bits`: returns
/// `log_g(z) mod 2^bits`. Requires `2^bits | q-1`, `g` a generator, `z != 0`.
pub(crate) fn pohlig_hellman_pow2(z: u64, q: u64, g: u64, bits: u32) -> u64 {
    let order = 1u64 << bits;
    debug_assert_eq!((q - 1) % order, 0);
    let cofactor = (q - 1) / order;
    let gamma = pow_mod(g, cofactor, q);
    let gamma_inv = pow_mod(gamma, order - 1, q);
    // cur = h * gamma^(-x) for the bits of x fixed so far
    let mut cur = pow_mod(z, cofactor, q);
    let mut step = gamma_inv;
    let mut x = 0u64;
    for k in 0..bits {
        let mut t = cur;
        for _ in 0..(bits - 1 - k) {
            t = mul_mod(t, t, q);
        }
        if t != 1 {
            x |= 1 << k;
            cur = mul_mod(cur, step, q);
        }
        step = mul_mod(step, step, q);
    }
    x
}

/// `log_g(z) mod 2^m` for a context in discrete-log mode.
pub fn dlog_pow2(z: u64, ctx: &FieldCtx) -> Result<u64, DlogError> {
    if z == 0 {
        return Err(DlogError::Zero);
    }
    if z >= ctx.q() {
        return Err(DlogError::OutOfField { z, q: ctx.q() });
    }
    if !ctx.is_dlog_mode() {
        return Err(DlogError::NotDlogMode);
    }
    Ok(pohlig_hellman_pow2(z, ctx.q(), ctx.g(), ctx.m()))
}

/// The exponent `e` in `[0, q-1)` with `g^e = z`, by linear scan.
pub fn dlog_brute(z: u64, ctx: &FieldCtx) -> Result<u64, DlogError> {
    let q = ctx.q();
    if q > BRUTE_FORCE_CAP {
        return Err(DlogError::BruteRange {
            q,
            cap: BRUTE_FORCE_CAP,
        });
    }
    if z == 0 {
        return Err(DlogError::Zero);
    }
    if z >= q {
        return Err(DlogError::OutOfField { z, q });
    }
    let mut acc = 1u64;
    for e in 0..q - 1 {
        if acc == z {
            return Ok(e);
        }
        acc = mul_mod(acc, ctx.g(), q);
    }
    unreachable!("g generates F_q^x")
}

/// Full discrete-log table of a small field, built by one pass over the
/// powers of the generator.
#[derive(Debug, Clone)]
pub struct DlogTable {
    q: u64,
    logs: Vec<u32>,
}

impl DlogTable {
    pub fn new(ctx: &FieldCtx) -> Result<Self, DlogError> {
        let q = ctx.q();
        if q > BRUTE_FORCE_CAP {
            return Err(DlogError::BruteRange {
                q,
                cap: BRUTE_FORCE_CAP,
            });
        }
        let mut logs = vec![u32::MAX; q as usize];
        let mut acc = 1u64;
        for e in 0..q - 1 {
            logs[acc as usize] = e as u32;
            acc = mul_mod(acc, ctx.g(), q);
        }
        Ok(DlogTable { q, logs })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// `None` for zero.
    #[inline]
    pub fn log(&self, z: u64) -> Option<u64> {
        let e = self.logs[(z % self.q) as usize];
        (e != u32::MAX).then_some(e as u64)
    }
}
