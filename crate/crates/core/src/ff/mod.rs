//! Prime-field and binary-field arithmetic.
//!
//! Prime moduli are restricted to `u64` so that Miller-Rabin with a fixed
//! witness set is deterministic over the whole supported range. Binary fields
//! are represented by `u128` bit vectors (bit `i` is the coefficient of `z^i`).

mod gf2;
mod prime;

pub use gf2::{gf2_find_irreducible, gf2_is_irreducible, Gf2Ctx, GF2_MAX_DEGREE};
pub use prime::{
    factorize, find_generator, find_prime_1_mod_m, find_prime_1_mod_m_above, is_prime, mul_mod,
    next_prime_above, pow_mod, FieldCtx, FieldCtxRecord, PrimeSearch, DEFAULT_SEARCH_CAP,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FfError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is even; an odd prime is required")]
    EvenModulus(u64),
    #[error("{0} is not a power of two with exponent >= 1")]
    NotPowerOfTwo(u64),
    #[error("exponent m={0} is outside the supported range 0..=62")]
    ExponentOutOfRange(u32),
    #[error("no prime = 1 (mod {big_m}) found within {cap} candidates")]
    SearchCapExceeded { big_m: u64, cap: u64 },
    #[error("candidate overflowed the 64-bit modulus range")]
    ModulusOverflow,
    #[error("factorization of {0} did not finish within the iteration bound")]
    FactorizationTimeout(u64),
    #[error("M={big_m} does not divide q-1={q_minus_1}")]
    NotDlogMode { big_m: u64, q_minus_1: u64 },
    #[error("binary field degree {0} outside 1..={GF2_MAX_DEGREE}")]
    DegreeOutOfRange(u32),
    #[error("polynomial {poly:#x} is not an irreducible of degree {v}")]
    NotIrreducible { v: u32, poly: u128 },
    #[error("field context record is inconsistent: {0}")]
    InvalidRecord(String),
}
