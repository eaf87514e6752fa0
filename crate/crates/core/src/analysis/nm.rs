use std::collections::HashMap;

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dlog::euler_char;

use super::charsum::{check_elements, check_map, Characters};
use super::dist::{ratio, Value};
use super::{AnalysisError, TOL};

/// Largest output group handled by [`nm_distance`].
pub const MAX_NM_M: u64 = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmVariant {
    /// Quadratic character bit; `M = 2`.
    Bit,
    /// `log_g mod M` with `M | q-1`.
    Dlog,
    /// `log_g mod M` for any power of two `M < q`.
    GeneralM,
}

impl std::str::FromStr for NmVariant {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bit" => Ok(NmVariant::Bit),
            "dlog" => Ok(NmVariant::Dlog),
            "general_m" | "generalM" | "general-m" => Ok(NmVariant::GeneralM),
            _ => Err(AnalysisError::Shape(format!("unknown variant {s:?}"))),
        }
    }
}

/// Output of the extractor on every `z = x + y`, designated zero included.
pub fn output_table(q: u64, m: u64, variant: NmVariant) -> Result<Vec<u32>, AnalysisError> {
    if m == 0 || m > MAX_NM_M || !m.is_power_of_two() {
        return Err(AnalysisError::Shape(format!("M={m} must be a power of two up to {MAX_NM_M}")));
    }
    if q < 3 || (m > 1 && m >= q) {
        return Err(AnalysisError::Shape(format!("M={m} must be below q={q}")));
    }
    match variant {
        NmVariant::Bit => {
            if m != 2 {
                return Err(AnalysisError::Shape("the bit variant has M = 2".into()));
            }
            if !crate::ff::is_prime(q) {
                return Err(AnalysisError::Field(format!("q={q} is not prime")));
            }
            Ok((0..q).map(|z| euler_char(z, q).to_bit() as u32).collect())
        }
        NmVariant::Dlog | NmVariant::GeneralM => {
            if variant == NmVariant::Dlog && !(q - 1).is_multiple_of(m) {
                return Err(AnalysisError::Shape(format!("M={m} does not divide q-1={}", q - 1)));
            }
            let chars = Characters::new(q)?;
            Ok((0..q).map(|z| chars.log(z).map_or(0, |l| (l % m) as u32)).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmReport {
    pub q: u64,
    pub m: u64,
    pub variant: NmVariant,
    pub s_size: usize,
    pub t_size: usize,
    /// Seeds in the order given.
    pub seeds: Vec<u64>,
    /// `Delta_y = numerators[i] / denominator` for `y = seeds[i]`.
    pub numerators: Vec<u64>,
    pub denominator: u64,
    pub distance: Value,
    /// `M q^{1/4} 2^{1-k/2} + 1/q` with `k = log2 |S|`.
    pub bound: f64,
    /// Whether `T` is all of `F_q`.
    pub uniform_seed: bool,
    /// `Delta <= min(1, bound)`; set only for a uniform seed with `M | q-1`.
    pub pass: Option<bool>,
    /// `Delta / (n 2^{m + n/4 - k/2})` with `n = log2 q`, for `M` not dividing
    /// `q-1`. The constant in front is unknown, so there is no verdict.
    pub general_m_ratio: Option<f64>,
}

impl NmReport {
    pub fn per_seed(&self, y: u64) -> Option<BigRational> {
        let i = self.seeds.iter().position(|&s| s == y)?;
        Some(ratio(self.numerators[i], self.denominator))
    }

    /// Exact mean of the per-seed distances over `t`.
    pub fn reweight(&self, t: &[u64]) -> Result<BigRational, AnalysisError> {
        if t.is_empty() {
            return Err(AnalysisError::Empty);
        }
        let index: HashMap<u64, u64> = self.seeds.iter().copied().zip(self.numerators.iter().copied()).collect();
        let mut total: u128 = 0;
        for y in t {
            total += *index.get(y).ok_or_else(|| AnalysisError::Shape(format!("seed {y} not in report")))? as u128;
        }
        Ok(ratio(total, self.denominator as u128 * t.len() as u128))
    }
}

/// Exact `Delta((nm(X,Y), nm(X,A(Y)), Y), (U, nm(X,A(Y)), Y))` for `X` flat on
/// `S` and `Y` flat on `T`. `a_map[y]` is `A(y)`.
pub fn nm_distance(
    q: u64,
    m: u64,
    s: &[u64],
    a_map: &[u64],
    t: &[u64],
    variant: NmVariant,
) -> Result<NmReport, AnalysisError> {
    if s.is_empty() || t.is_empty() {
        return Err(AnalysisError::Empty);
    }
    check_elements(q, s)?;
    check_map(q, a_map, t)?;
    let out = output_table(q, m, variant)?;
    let mu = m as usize;
    let numerators: Vec<u64> = t
        .par_iter()
        .map(|&y| {
            let ay = a_map[y as usize];
            let mut c = vec![0i64; mu * mu];
            for &x in s {
                let a = out[((x + y) % q) as usize] as usize;
                let b = out[((x + ay) % q) as usize] as usize;
                c[a * mu + b] += 1;
            }
            let mut n = 0u64;
            for b in 0..mu {
                let cb: i64 = (0..mu).map(|a| c[a * mu + b]).sum();
                n += (0..mu).map(|a| (m as i64 * c[a * mu + b] - cb).unsigned_abs()).sum::<u64>();
            }
            n
        })
        .collect();
    let denominator = 2 * m * s.len() as u64;
    let total: u128 = numerators.iter().map(|&v| v as u128).sum();
    let distance = Value::exact(ratio(total, denominator as u128 * t.len() as u128));
    let k = (s.len() as f64).log2();
    let (qf, mf) = (q as f64, m as f64);
    let bound = mf * qf.powf(0.25) * 2f64.powf(1.0 - k / 2.0) + 1.0 / qf;
    let mut distinct = t.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let uniform_seed = distinct.len() as u64 == q && distinct.len() == t.len();
    let divides = (q - 1).is_multiple_of(m);
    let pass = (uniform_seed && divides).then(|| distance.value <= bound.min(1.0) + TOL);
    let general_m_ratio = (!divides).then(|| {
        let n = qf.log2();
        distance.value / (n * 2f64.powf(mf.log2() + n / 4.0 - k / 2.0))
    });
    Ok(NmReport {
        q,
        m,
        variant,
        s_size: s.len(),
        t_size: t.len(),
        seeds: t.to_vec(),
        numerators,
        denominator,
        distance,
        bound,
        uniform_seed,
        pass,
        general_m_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReweightCheck {
    pub t_size: usize,
    /// Mean of the full report's per-seed distances over `T'`.
    pub reweighted: Value,
    /// A fresh run with seed support `T'`.
    pub direct: Value,
    /// `(q / |T'|) * Delta` over the uniform seed.
    pub bound: Value,
    pub equal: bool,
    pub pass: bool,
}

/// Checks a weak-seed distance against the uniform-seed run it refines.
pub fn reweight_check(
    full: &NmReport,
    s: &[u64],
    a_map: &[u64],
    t_prime: &[u64],
) -> Result<ReweightCheck, AnalysisError> {
    if !full.uniform_seed {
        return Err(AnalysisError::Shape("reference run must use the uniform seed".into()));
    }
    let reweighted = full.reweight(t_prime)?;
    let direct = nm_distance(full.q, full.m, s, a_map, t_prime, full.variant)?.distance;
    let eps = full.distance.exact.clone().expect("exact");
    let bound = ratio(full.q, t_prime.len() as u64) * eps;
    let equal = direct.exact.as_ref() == Some(&reweighted);
    let pass = equal && reweighted <= bound;
    Ok(ReweightCheck {
        t_size: t_prime.len(),
        reweighted: Value::exact(reweighted),
        direct,
        bound: Value::exact(bound),
        equal,
        pass,
    })
}
