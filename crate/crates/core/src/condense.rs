//! Somewhere condenser: the block `(a, b, c) -> (a, b, c, ab + c)` over a
//! binary field, applied recursively `t` times to give `4^t` rows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{BitString, BitsError};
use crate::ff::{FfError, Gf2Ctx};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CondenseError {
    #[error("input length {0} is not a positive multiple of 3")]
    NotDivisibleBy3(u32),
    #[error("input length {n} does not match the condenser's {expected}")]
    LengthMismatch { n: u32, expected: u32 },
    #[error("cannot condense an empty input")]
    Empty,
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error(transparent)]
    Field(#[from] FfError),
}

/// The `C = 4^t` rows produced from one input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowMatrix {
    pub rows: Vec<BitString>,
    pub t: u32,
}

impl RowMatrix {
    pub fn row_len(&self) -> u32 {
        self.rows.first().map_or(0, BitString::len)
    }
}

/// Smallest multiple of `3^t` that is at least `n`.
pub fn padded_len(n: u32, t: u32) -> u32 {
    let unit = 3u32.pow(t);
    n.div_ceil(unit) * unit
}

fn block(x: &BitString, field: &Gf2Ctx) -> Result<[BitString; 4], CondenseError> {
    let w = field.degree();
    let a = x.slice(1, w)?;
    let b = x.slice(w + 1, 2 * w)?;
    let c = x.slice(2 * w + 1, 3 * w)?;
    let d = BitString::new(field.mul(a.value(), b.value()) ^ c.value(), w)?;
    Ok([a, b, c, d])
}

/// One application of the block to a `3w`-bit input.
pub fn basic_condense(x: &BitString) -> Result<[BitString; 4], CondenseError> {
    if x.is_empty() || !x.len().is_multiple_of(3) {
        return Err(CondenseError::NotDivisibleBy3(x.len()));
    }
    block(x, &Gf2Ctx::new(x.len() / 3)?)
}

/// A condenser for fixed `(n, t)`, caching the field of every level.
#[derive(Debug, Clone)]
pub struct Condenser {
    n: u32,
    t: u32,
    fields: Vec<Gf2Ctx>,
}

impl Condenser {
    pub fn new(n: u32, t: u32) -> Result<Self, CondenseError> {
        if n == 0 {
            return Err(CondenseError::Empty);
        }
        let padded = padded_len(n, t);
        let fields = (1..=t)
            .map(|level| Gf2Ctx::new(padded / 3u32.pow(level)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Condenser { n, t, fields })
    }

    pub fn rows(&self) -> usize {
        1 << (2 * self.t)
    }

    pub fn row_len(&self) -> u32 {
        padded_len(self.n, self.t) / 3u32.pow(self.t)
    }

    pub fn condense(&self, x: &BitString) -> Result<RowMatrix, CondenseError> {
        if x.len() != self.n {
            return Err(CondenseError::LengthMismatch {
                n: x.len(),
                expected: self.n,
            });
        }
        // trailing zero padding leaves the value unchanged
        let mut rows = vec![BitString::new(x.value(), padded_len(self.n, self.t))?];
        for field in &self.fields {
            let mut next = Vec::with_capacity(rows.len() * 4);
            for row in &rows {
                next.extend(block(row, field)?);
            }
            rows = next;
        }
        Ok(RowMatrix { rows, t: self.t })
    }
}

/// One-shot form of [`Condenser::condense`].
pub fn somewhere_condense(x: &BitString, t: u32) -> Result<RowMatrix, CondenseError> {
    Condenser::new(x.len(), t)?.condense(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::index::sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bs(value: u128, len: u32) -> BitString {
        BitString::new(value, len).unwrap()
    }

    #[test]
    fn block_examples() {
        let rows = basic_condense(&bs(0, 9)).unwrap();
        assert!(rows.iter().all(|r| *r == bs(0, 3)));
        // a = z, b = z + 1, c = 0 in GF(4)
        let x = bs(0b00_11_10, 6);
        let rows = basic_condense(&x).unwrap();
        assert_eq!(rows[0], bs(0b10, 2));
        assert_eq!(rows[1], bs(0b11, 2));
        assert_eq!(rows[2], bs(0, 2));
        assert_eq!(rows[3], bs(1, 2));
        assert!(basic_condense(&bs(0, 7)).is_err());
        assert!(basic_condense(&BitString::empty()).is_err());
    }

    #[test]
    fn first_three_rows_are_the_thirds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = BitString::random(96, &mut rng).unwrap();
            let rows = basic_condense(&x).unwrap();
            let back = rows[0].concat(&rows[1]).unwrap().concat(&rows[2]).unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn shapes() {
        let x = bs(0b101101, 6);
        assert_eq!(somewhere_condense(&x, 0).unwrap().rows, vec![x]);
        let m = somewhere_condense(&x, 1).unwrap();
        assert_eq!((m.rows.len(), m.row_len()), (4, 2));
        for n in 1..=9 {
            let m = somewhere_condense(&bs(0b1_0110_1011 & ((1 << n) - 1), n), 2).unwrap();
            assert_eq!((m.rows.len(), m.row_len()), (16, 1));
        }
        for (n, t) in [(96, 1), (96, 2), (100, 3), (27, 3)] {
            let c = Condenser::new(n, t).unwrap();
            let m = c.condense(&bs(1, n)).unwrap();
            assert_eq!(m.rows.len(), c.rows());
            assert_eq!(c.rows(), 4usize.pow(t));
            assert!(m.rows.iter().all(|r| r.len() == padded_len(n, t) / 3u32.pow(t)));
        }
        assert!(Condenser::new(0, 1).is_err());
    }

    #[test]
    fn deterministic() {
        let c = Condenser::new(96, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = BitString::random(96, &mut rng).unwrap();
            assert_eq!(c.condense(&x).unwrap(), c.condense(&x).unwrap());
            assert_eq!(c.condense(&x).unwrap(), somewhere_condense(&x, 2).unwrap());
        }
    }

    // Regression tripwire: sample flat sources of rate 0.3 and check that the
    // best row's empirical min-entropy rate beats the input rate.
    #[test]
    fn condensing_smoke() {
        const SAMPLES: usize = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, t) in [(12u32, 1u32), (27, 2), (42, 1)] {
            let c = Condenser::new(n, t).unwrap();
            let row_len = c.row_len();
            assert!(row_len <= 14);
            let k = (0.3 * n as f64).ceil() as usize;
            let sources = 20;
            let mut good = 0;
            for _ in 0..sources {
                let support: Vec<u128> = sample(&mut rng, 1 << n, 1 << k)
                    .into_iter()
                    .map(|v| v as u128)
                    .collect();
                let mut counts = vec![vec![0u32; 1 << row_len]; c.rows()];
                for _ in 0..SAMPLES {
                    let x = support[rng.gen_range(0..support.len())];
                    let m = c.condense(&bs(x, n)).unwrap();
                    for (i, r) in m.rows.iter().enumerate() {
                        counts[i][r.value() as usize] += 1;
                    }
                }
                let best_rate = counts
                    .iter()
                    .map(|h| {
                        let max = *h.iter().max().unwrap() as f64 / SAMPLES as f64;
                        -max.log2() / row_len as f64
                    })
                    .fold(0.0, f64::max);
                if best_rate > k as f64 / n as f64 {
                    good += 1;
                }
            }
            assert!(good * 10 >= sources * 9, "n={n} t={t}: {good}/{sources}");
        }
    }
}
