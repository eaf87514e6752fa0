use serde::{Deserialize, Serialize};

use super::FfError;

/// Default number of progression terms `iM+1` tried before giving up.
pub const DEFAULT_SEARCH_CAP: u64 = 1 << 24;

// Deterministic for every n < 3.3 * 10^24, which covers all of u64.
const MR_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

const POLLARD_ITERATION_BOUND: u64 = 1 << 22;

#[inline]
pub fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

/// `base^exp mod q` by square-and-multiply.
pub fn pow_mod(base: u64, mut exp: u64, q: u64) -> u64 {
    debug_assert!(q >= 2);
    let mut result = 1 % q;
    let mut b = base % q;
    while exp > 0 {
        if exp & 1 == 1 {
            result = mul_mod(result, b, q);
        }
        b = mul_mod(b, b, q);
        exp >>= 1;
    }
    result
}

/// Deterministic Miller-Rabin over the full `u64` range. Values below 2 are
/// not prime.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_WITNESSES {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &MR_WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Result of scanning the progression `M+1, 2M+1, 3M+1, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeSearch {
    pub q: u64,
    /// The `i` with `q = i*M + 1`.
    pub index: u64,
}

fn check_power_of_two(big_m: u64) -> Result<(), FfError> {
    if big_m < 2 || !big_m.is_power_of_two() {
        return Err(FfError::NotPowerOfTwo(big_m));
    }
    Ok(())
}

/// Least prime `q = 1 (mod M)`, scanning at most `cap` terms.
pub fn find_prime_1_mod_m(big_m: u64, cap: u64) -> Result<PrimeSearch, FfError> {
    find_prime_1_mod_m_above(big_m, 0, cap)
}

/// Least prime `q = 1 (mod M)` with `q > lower`.
pub fn find_prime_1_mod_m_above(big_m: u64, lower: u64, cap: u64) -> Result<PrimeSearch, FfError> {
    check_power_of_two(big_m)?;
    // smallest i >= 1 with i*M + 1 > lower
    let first = (lower / big_m).max(1);
    for index in first..first.saturating_add(cap) {
        let q = index
            .checked_mul(big_m)
            .and_then(|v| v.checked_add(1))
            .ok_or(FfError::ModulusOverflow)?;
        if q > lower && is_prime(q) {
            return Ok(PrimeSearch { q, index });
        }
    }
    Err(FfError::SearchCapExceeded { big_m, cap })
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime_above(n: u64) -> Result<u64, FfError> {
    let mut c = n.checked_add(1).ok_or(FfError::ModulusOverflow)?;
    loop {
        if is_prime(c) {
            return Ok(c);
        }
        c = c.checked_add(1).ok_or(FfError::ModulusOverflow)?;
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

// Brent's variant of Pollard rho. Returns a nontrivial factor of a composite n.
fn pollard_brent(n: u64) -> Option<u64> {
    if n.is_multiple_of(2) {
        return Some(2);
    }
    for c in 1..64u64 {
        let f = |x: u64| ((mul_mod(x, x, n) as u128 + c as u128) % n as u128) as u64;
        let mut y = 2u64;
        let mut r = 1u64;
        let mut q = 1u64;
        let mut g = 1u64;
        let mut x = y;
        let mut ys = y;
        let m = 128u64;
        let mut iterations = 0u64;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..m.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = gcd(q, n);
                k += m;
            }
            r *= 2;
            iterations += r;
            if iterations > POLLARD_ITERATION_BOUND {
                return None;
            }
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return Some(g);
        }
    }
    None
}

/// Prime factorization with multiplicity, sorted ascending. `factorize(1)` is empty.
pub fn factorize(n: u64) -> Result<Vec<u64>, FfError> {
    let mut out = Vec::new();
    if n <= 1 {
        return Ok(out);
    }
    let mut rest = n;
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47] {
        while rest.is_multiple_of(p) {
            out.push(p);
            rest /= p;
        }
    }
    let mut stack = vec![rest];
    while let Some(m) = stack.pop() {
        if m == 1 {
            continue;
        }
        if is_prime(m) {
            out.push(m);
            continue;
        }
        let d = pollard_brent(m).ok_or(FfError::FactorizationTimeout(n))?;
        stack.push(d);
        stack.push(m / d);
    }
    out.sort_unstable();
    Ok(out)
}

/// Smallest generator of `F_q^x`, certified against the distinct primes in
/// `factors` (the factorization of `q-1`).
pub fn find_generator(q: u64, factors: &[u64]) -> u64 {
    if q == 2 {
        return 1;
    }
    let mut distinct = factors.to_vec();
    distinct.dedup();
    (2..q)
        .find(|&g| distinct.iter().all(|&p| pow_mod(g, (q - 1) / p, q) != 1))
        .expect("a prime modulus always has a generator")
}

/// A prime field `F_q` together with its distinguished generator and the
/// 2-power subgroup data used by the discrete-log extractor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldCtx {
    q: u64,
    m: u32,
    g: u64,
    factors: Vec<u64>,
    cofactor: Option<u64>,
}

impl FieldCtx {
    /// Builds the context for an odd prime `q` with output exponent `m`.
    /// The cofactor `(q-1)/2^m` is recorded only when `2^m | q-1`.
    pub fn new(q: u64, m: u32) -> Result<Self, FfError> {
        if m > 62 {
            return Err(FfError::ExponentOutOfRange(m));
        }
        if q.is_multiple_of(2) {
            return Err(FfError::EvenModulus(q));
        }
        if !is_prime(q) {
            return Err(FfError::NotPrime(q));
        }
        let factors = factorize(q - 1)?;
        let g = find_generator(q, &factors);
        let big_m = 1u64 << m;
        let cofactor = (q - 1).is_multiple_of(big_m).then(|| (q - 1) / big_m);
        Ok(FieldCtx {
            q,
            m,
            g,
            factors,
            cofactor,
        })
    }

    /// Like [`FieldCtx::new`] but requires `2^m | q-1`.
    pub fn dlog_mode(q: u64, m: u32) -> Result<Self, FfError> {
        let ctx = Self::new(q, m)?;
        if ctx.cofactor.is_none() {
            return Err(FfError::NotDlogMode {
                big_m: ctx.big_m(),
                q_minus_1: q - 1,
            });
        }
        Ok(ctx)
    }

    /// Context over the least prime `q = 1 (mod 2^m)` above `lower`.
    pub fn smallest_above(m: u32, lower: u64) -> Result<Self, FfError> {
        if !(1..=62).contains(&m) {
            return Err(FfError::ExponentOutOfRange(m));
        }
        let found = find_prime_1_mod_m_above(1u64 << m, lower, DEFAULT_SEARCH_CAP)?;
        Self::dlog_mode(found.q, m)
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn big_m(&self) -> u64 {
        1u64 << self.m
    }

    pub fn g(&self) -> u64 {
        self.g
    }

    pub fn factors(&self) -> &[u64] {
        &self.factors
    }

    pub fn cofactor(&self) -> Option<u64> {
        self.cofactor
    }

    pub fn is_dlog_mode(&self) -> bool {
        self.cofactor.is_some()
    }

    /// Number of bits needed to write any element of the field.
    pub fn element_bits(&self) -> u32 {
        64 - (self.q - 1).leading_zeros()
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % self.q as u128) as u64
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        mul_mod(a, b, self.q)
    }

    pub fn pow(&self, base: u64, exp: u64) -> u64 {
        pow_mod(base, exp, self.q)
    }

    pub fn record(&self) -> FieldCtxRecord {
        FieldCtxRecord {
            q: self.q,
            m: self.m,
            g: self.g,
            factors: self.factors.clone(),
        }
    }
}

/// Flat JSON form `{q, m, g, factors}` used to cache contexts between runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldCtxRecord {
    pub q: u64,
    pub m: u32,
    pub g: u64,
    pub factors: Vec<u64>,
}

impl TryFrom<FieldCtxRecord> for FieldCtx {
    type Error = FfError;

    fn try_from(rec: FieldCtxRecord) -> Result<Self, FfError> {
        let ctx = FieldCtx::new(rec.q, rec.m)?;
        if ctx.g != rec.g {
            return Err(FfError::InvalidRecord(format!(
                "generator {} is not the smallest generator {}",
                rec.g, ctx.g
            )));
        }
        if ctx.factors != rec.factors {
            return Err(FfError::InvalidRecord(
                "factors do not match the factorization of q-1".into(),
            ));
        }
        Ok(ctx)
    }
}

impl Serialize for FieldCtx {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FieldCtx {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = FieldCtxRecord::deserialize(d)?;
        FieldCtx::try_from(rec).map_err(serde::de::Error::custom)
    }
}
