use super::FfError;

/// Largest supported binary field degree; the modulus needs `v + 1` bits.
pub const GF2_MAX_DEGREE: u32 = 127;

#[inline]
fn mask(v: u32) -> u128 {
    if v >= 128 {
        u128::MAX
    } else {
        (1u128 << v) - 1
    }
}

fn degree(p: u128) -> Option<u32> {
    (p != 0).then(|| 127 - p.leading_zeros())
}

// a * b mod `poly`, where `poly` has degree exactly v and a, b < 2^v.
// Shift-and-add with the reduction folded into every step so no intermediate
// exceeds v bits.
fn mul_mod_poly(a: u128, b: u128, poly: u128, v: u32) -> u128 {
    let low = poly & mask(v);
    let top = v - 1;
    let mut r = 0u128;
    for i in (0..v).rev() {
        let carry = (r >> top) & 1;
        r = (r << 1) & mask(v);
        if carry == 1 {
            r ^= low;
        }
        if (b >> i) & 1 == 1 {
            r ^= a;
        }
    }
    r
}

// Remainder of `a` modulo `b` in GF(2)[z].
fn poly_rem(mut a: u128, b: u128) -> u128 {
    let db = degree(b).expect("division by zero polynomial");
    while let Some(da) = degree(a) {
        if da < db {
            break;
        }
        a ^= b << (da - db);
    }
    a
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = poly_rem(a, b);
        a = b;
        b = r;
    }
    a
}

fn distinct_prime_divisors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Rabin's irreducibility test for a polynomial of degree `1..=127`.
pub fn gf2_is_irreducible(poly: u128) -> bool {
    let Some(v) = degree(poly) else {
        return false;
    };
    if v == 0 {
        return false;
    }
    // the element `z` reduced modulo poly
    let z = poly_rem(2, poly);
    // z^(2^k) mod poly
    let frobenius = |k: u32| {
        let mut x = z;
        for _ in 0..k {
            x = mul_mod_poly(x, x, poly, v);
        }
        x
    };
    if frobenius(v) != z {
        return false;
    }
    distinct_prime_divisors(v)
        .into_iter()
        .all(|p| poly_gcd(poly, frobenius(v / p) ^ z) == 1)
}

/// Lexicographically smallest monic irreducible of degree `v`, ordered by the
/// integer encoding of its coefficients.
pub fn gf2_find_irreducible(v: u32) -> Result<u128, FfError> {
    if v == 0 || v > GF2_MAX_DEGREE {
        return Err(FfError::DegreeOutOfRange(v));
    }
    let lead = 1u128 << v;
    (0..=mask(v))
        .map(|low| lead | low)
        .find(|&p| gf2_is_irreducible(p))
        .ok_or(FfError::DegreeOutOfRange(v))
}

/// The binary field `GF(2^v)` modulo a fixed irreducible polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gf2Ctx {
    v: u32,
    poly: u128,
}

impl Gf2Ctx {
    /// Field of degree `v` over the lexicographically first irreducible.
    pub fn new(v: u32) -> Result<Self, FfError> {
        let poly = gf2_find_irreducible(v)?;
        Ok(Gf2Ctx { v, poly })
    }

    pub fn with_poly(v: u32, poly: u128) -> Result<Self, FfError> {
        if v == 0 || v > GF2_MAX_DEGREE {
            return Err(FfError::DegreeOutOfRange(v));
        }
        if degree(poly) != Some(v) || !gf2_is_irreducible(poly) {
            return Err(FfError::NotIrreducible { v, poly });
        }
        Ok(Gf2Ctx { v, poly })
    }

    pub fn degree(&self) -> u32 {
        self.v
    }

    pub fn poly(&self) -> u128 {
        self.poly
    }

    /// Mask of valid element bits.
    pub fn mask(&self) -> u128 {
        mask(self.v)
    }

    pub fn order(&self) -> u128 {
        1u128 << self.v
    }

    pub fn mul(&self, a: u128, b: u128) -> u128 {
        debug_assert!(a <= self.mask() && b <= self.mask());
        mul_mod_poly(a, b, self.poly, self.v)
    }

    pub fn pow(&self, base: u128, mut exp: u128) -> u128 {
        let mut result = 1u128;
        let mut b = base;
        while exp > 0 {
            if exp & 1 == 1 {
                result = self.mul(result, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        result
    }
}
