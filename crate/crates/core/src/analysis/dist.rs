use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::AnalysisError;

pub(crate) fn ratio(n: impl Into<BigInt>, d: impl Into<BigInt>) -> BigRational {
    BigRational::new(n.into(), d.into())
}

pub(crate) fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A finite distribution, exact when built from rationals or counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    exact: Option<Vec<BigRational>>,
    float: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<BigRational>) -> Result<Self, AnalysisError> {
        if probs.is_empty() {
            return Err(AnalysisError::Empty);
        }
        if probs.iter().any(|p| p.is_negative()) {
            return Err(AnalysisError::InvalidDistribution("negative mass".into()));
        }
        let total: BigRational = probs.iter().sum();
        if !total.is_one() {
            return Err(AnalysisError::InvalidDistribution(format!("mass sums to {total}")));
        }
        let float = probs.iter().map(to_f64).collect();
        Ok(Distribution {
            exact: Some(probs),
            float,
        })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self, AnalysisError> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(AnalysisError::Empty);
        }
        Self::new(counts.iter().map(|&c| ratio(c, total)).collect())
    }

    /// Floating fallback; sums must be within `1e-9` of one.
    pub fn from_f64(probs: Vec<f64>) -> Result<Self, AnalysisError> {
        if probs.is_empty() {
            return Err(AnalysisError::Empty);
        }
        if probs.iter().any(|&p| p.is_nan() || p < 0.0) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(AnalysisError::InvalidDistribution("floating mass not a distribution".into()));
        }
        Ok(Distribution {
            exact: None,
            float: probs,
        })
    }

    pub fn uniform(n: usize) -> Result<Self, AnalysisError> {
        Self::from_counts(&vec![1; n])
    }

    pub fn point(n: usize, i: usize) -> Result<Self, AnalysisError> {
        let mut c = vec![0; n];
        *c.get_mut(i).ok_or(AnalysisError::Empty)? = 1;
        Self::from_counts(&c)
    }

    pub fn len(&self) -> usize {
        self.float.len()
    }

    pub fn is_empty(&self) -> bool {
        self.float.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn probs(&self) -> &[f64] {
        &self.float
    }
}

/// A value that is exact whenever its inputs were.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Value {
    #[serde(serialize_with = "ser_opt_ratio")]
    pub exact: Option<BigRational>,
    pub value: f64,
    /// Set when floating inputs forced an approximate result.
    pub fallback: bool,
}

fn ser_opt_ratio<S: serde::Serializer>(r: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.collect_str(r),
        None => s.serialize_none(),
    }
}

impl Value {
    pub(crate) fn exact(r: BigRational) -> Self {
        Value {
            value: to_f64(&r),
            exact: Some(r),
            fallback: false,
        }
    }
}

/// `(1/2) sum |p_i - q_i|`.
pub fn stat_distance(p: &Distribution, q: &Distribution) -> Result<Value, AnalysisError> {
    if p.len() != q.len() {
        return Err(AnalysisError::SupportMismatch(p.len(), q.len()));
    }
    if let (Some(a), Some(b)) = (p.exact(), q.exact()) {
        let sum: BigRational = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        return Ok(Value::exact(sum / ratio(2, 1)));
    }
    let value = 0.5 * p.probs().iter().zip(q.probs()).map(|(x, y)| (x - y).abs()).sum::<f64>();
    Ok(Value {
        exact: None,
        value,
        fallback: true,
    })
}

/// `-log2 max_i p_i`.
pub fn min_entropy(p: &Distribution) -> f64 {
    match p.exact() {
        Some(e) => -to_f64(e.iter().max().expect("nonempty")).log2(),
        None => -p.probs().iter().cloned().fold(0.0, f64::max).log2(),
    }
}

/// Exact joint probability table over a product of finite sets, row-major
/// with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    names: Vec<String>,
    sizes: Vec<usize>,
    probs: Vec<BigRational>,
}

impl JointTable {
    pub fn new(axes: &[(&str, usize)], probs: Vec<BigRational>) -> Result<Self, AnalysisError> {
        let size: usize = axes.iter().map(|a| a.1).product();
        if axes.is_empty() || size == 0 {
            return Err(AnalysisError::Empty);
        }
        if probs.len() != size {
            return Err(AnalysisError::SupportMismatch(probs.len(), size));
        }
        let names: Vec<String> = axes.iter().map(|a| a.0.to_string()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(AnalysisError::Axis(n.clone()));
            }
        }
        Distribution::new(probs.clone())?;
        Ok(JointTable {
            names,
            sizes: axes.iter().map(|a| a.1).collect(),
            probs,
        })
    }

    pub fn from_weights(axes: &[(&str, usize)], weights: &[u64]) -> Result<Self, AnalysisError> {
        let total: u64 = weights.iter().sum();
        if total == 0 {
            return Err(AnalysisError::Empty);
        }
        Self::new(axes, weights.iter().map(|&w| ratio(w, total)).collect())
    }

    pub fn axes(&self) -> Vec<(&str, usize)> {
        self.names.iter().map(String::as_str).zip(self.sizes.iter().copied()).collect()
    }

    pub fn probs(&self) -> &[BigRational] {
        &self.probs
    }

    fn axis(&self, name: &str) -> Result<usize, AnalysisError> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| AnalysisError::Axis(name.to_string()))
    }

    fn coords(&self, mut flat: usize) -> Vec<usize> {
        let mut c = vec![0; self.sizes.len()];
        for (i, &s) in self.sizes.iter().enumerate().rev() {
            c[i] = flat % s;
            flat /= s;
        }
        c
    }

    /// Sums out every axis not in `keep`; the result has `keep`'s order.
    pub fn marginal(&self, keep: &[&str]) -> Result<JointTable, AnalysisError> {
        let idx: Vec<usize> = keep.iter().map(|k| self.axis(k)).collect::<Result<_, _>>()?;
        let sizes: Vec<usize> = idx.iter().map(|&i| self.sizes[i]).collect();
        let mut probs = vec![BigRational::zero(); sizes.iter().product()];
        for (flat, p) in self.probs.iter().enumerate() {
            let c = self.coords(flat);
            let target = idx.iter().fold(0, |acc, &i| acc * self.sizes[i] + c[i]);
            probs[target] += p;
        }
        let axes: Vec<(&str, usize)> = keep.iter().copied().zip(sizes).collect();
        JointTable::new(&axes, probs)
    }

    pub fn distribution(&self, axis: &str) -> Result<Distribution, AnalysisError> {
        Distribution::new(self.marginal(&[axis])?.probs)
    }

    /// `sum_c max_t P(t, c)`: the best average guessing probability.
    pub fn guessing_probability(&self, target: &str, cond: &str) -> Result<BigRational, AnalysisError> {
        let m = self.marginal(&[cond, target])?;
        let width = m.sizes[1];
        Ok(m.probs
            .chunks(width)
            .map(|row| row.iter().max().cloned().unwrap_or_else(BigRational::zero))
            .sum())
    }
}

/// `-log2 E_c[max_t Pr[T = t | C = c]]`, exact up to the final logarithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondEntropy {
    pub guess: Value,
    pub bits: f64,
}

pub fn avg_cond_min_entropy(j: &JointTable, target: &str, cond: &str) -> Result<CondEntropy, AnalysisError> {
    let g = j.guessing_probability(target, cond)?;
    let bits = -to_f64(&g).log2();
    Ok(CondEntropy {
        guess: Value::exact(g),
        bits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadCheck {
    pub s: u32,
    /// `Pr_c[H(T | C = c) < H~(T | C) - s]`.
    pub probability: Value,
    pub bound: f64,
    pub pass: bool,
}

/// Checks that conditioning values whose entropy drops more than `s` below
/// the average carry mass at most `2^-s`.
pub fn entropy_spread_check(j: &JointTable, target: &str, cond: &str, s: u32) -> Result<SpreadCheck, AnalysisError> {
    let g = j.guessing_probability(target, cond)?;
    let m = j.marginal(&[cond, target])?;
    let width = m.sizes[1];
    let scale = ratio(BigInt::one() << s, 1);
    // H(T|C=c) < H~ - s  <=>  max_t P(t|c) > 2^s * g
    let bad: BigRational = m
        .probs
        .chunks(width)
        .filter_map(|row| {
            let pc: BigRational = row.iter().sum();
            if pc.is_zero() {
                return None;
            }
            let max = row.iter().max().expect("nonempty");
            (max / &pc > &scale * &g).then_some(pc)
        })
        .sum();
    let bound = ratio(1, BigInt::one() << s);
    Ok(SpreadCheck {
        s,
        pass: bad <= bound,
        probability: Value::exact(bad),
        bound: to_f64(&bound),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageCheck {
    pub cond_entropy: f64,
    pub entropy: f64,
    pub support: usize,
    pub pass: bool,
}

/// Checks `H~(T|C) >= H(T) - log2 |supp C|` exactly, as
/// `guess <= max P(T) * |supp C|`.
pub fn leakage_chain_check(j: &JointTable, target: &str, cond: &str) -> Result<LeakageCheck, AnalysisError> {
    let g = j.guessing_probability(target, cond)?;
    let pt = j.distribution(target)?;
    let pc = j.distribution(cond)?;
    let support = pc.exact().expect("exact").iter().filter(|p| !p.is_zero()).count();
    let max_t = pt.exact().expect("exact").iter().max().expect("nonempty").clone();
    Ok(LeakageCheck {
        cond_entropy: -to_f64(&g).log2(),
        entropy: min_entropy(&pt),
        support,
        pass: g <= max_t * ratio(support as u64, 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(n: i64, d: i64) -> BigRational {
        ratio(n, d)
    }

    #[test]
    fn distance_examples() {
        let u = Distribution::uniform(2).unwrap();
        let pt = Distribution::point(2, 0).unwrap();
        assert_eq!(stat_distance(&u, &u).unwrap().exact, Some(r(0, 1)));
        assert_eq!(stat_distance(&u, &pt).unwrap().exact, Some(r(1, 2)));
        let a = Distribution::new(vec![r(5, 10), r(3, 10), r(2, 10)]).unwrap();
        let b = Distribution::new(vec![r(2, 10), r(3, 10), r(5, 10)]).unwrap();
        assert_eq!(stat_distance(&a, &b).unwrap().exact, Some(r(3, 10)));
        assert!(stat_distance(&a, &u).is_err());
        let f = Distribution::from_f64(vec![0.2, 0.3, 0.5]).unwrap();
        let v = stat_distance(&a, &f).unwrap();
        assert!(v.fallback && (v.value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn invalid_distributions() {
        assert!(Distribution::new(vec![r(1, 2), r(1, 3)]).is_err());
        assert!(Distribution::new(vec![r(3, 2), r(-1, 2)]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::from_f64(vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn entropy_examples() {
        for k in 0..6 {
            assert_eq!(min_entropy(&Distribution::uniform(1 << k).unwrap()), k as f64);
        }
        // X uniform on 2 bits, W its first bit
        let mut w = vec![0u64; 8];
        for x in 0..4 {
            w[x * 2 + (x & 1)] = 1;
        }
        let j = JointTable::from_weights(&[("x", 4), ("w", 2)], &w).unwrap();
        let h = avg_cond_min_entropy(&j, "x", "w").unwrap();
        assert_eq!(h.guess.exact, Some(r(1, 2)));
        assert_eq!(h.bits, 1.0);
        // independent W
        let j = JointTable::from_weights(&[("x", 4), ("w", 3)], &[1, 2, 3, 1, 2, 3, 2, 4, 6, 2, 4, 6]).unwrap();
        let hx = min_entropy(&j.distribution("x").unwrap());
        let h = avg_cond_min_entropy(&j, "x", "w").unwrap();
        assert!((h.bits - hx).abs() < 1e-12);
        assert!(j.marginal(&["nope"]).is_err());
    }

    #[test]
    fn marginals_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let w: Vec<u64> = (0..24).map(|_| rng.gen_range(0..10)).collect();
            let j = JointTable::from_weights(&[("a", 2), ("b", 3), ("c", 4)], &w).unwrap();
            for keep in [&["a"][..], &["c", "a"], &["b", "c"], &["c", "b", "a"]] {
                let m = j.marginal(keep).unwrap();
                let total: BigRational = m.probs().iter().sum();
                assert!(total.is_one());
            }
            let ab = j.marginal(&["a", "b"]).unwrap();
            let b_direct = j.distribution("b").unwrap();
            let b_via = ab.distribution("b").unwrap();
            assert_eq!(b_direct, b_via);
        }
    }

    #[test]
    fn spread_and_leakage_hold_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (nx, nw) = (rng.gen_range(1..9), rng.gen_range(1..6));
            let w: Vec<u64> = (0..nx * nw).map(|_| rng.gen_range(0..20)).collect();
            if w.iter().all(|&v| v == 0) {
                continue;
            }
            let j = JointTable::from_weights(&[("x", nx), ("w", nw)], &w).unwrap();
            for s in 0..4 {
                let c = entropy_spread_check(&j, "x", "w", s).unwrap();
                assert!(c.pass, "{c:?}");
            }
            assert!(leakage_chain_check(&j, "x", "w").unwrap().pass);
        }
    }

    #[test]
    fn spread_tightness_example() {
        // W = 0 w.p. 1/2 reveals X; W = 1 leaves X uniform on 16 values
        let mut w = vec![0u64; 32];
        w[0] = 16;
        for x in 0..16 {
            w[x * 2 + 1] = 1;
        }
        let j = JointTable::from_weights(&[("x", 16), ("w", 2)], &w).unwrap();
        let c = entropy_spread_check(&j, "x", "w", 0).unwrap();
        assert_eq!(c.probability.exact, Some(r(1, 2)));
        assert!(c.pass);
    }
}
