use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::dlog::{euler_char, DlogTable};
use crate::ff::FieldCtx;

use super::{AnalysisError, TOL};

/// Value given to `chi_0(0)`; every other exponent sends 0 to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroConvention {
    /// Extend `chi(0) = 0` before raising to the power `b`.
    #[default]
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharSpec {
    pub q: u64,
    pub a: u64,
    pub b: u64,
    #[serde(default)]
    pub zero_convention: ZeroConvention,
}

impl CharSpec {
    pub fn new(q: u64, a: u64, b: u64) -> Result<Self, AnalysisError> {
        let spec = CharSpec {
            q,
            a,
            b,
            zero_convention: ZeroConvention::Zero,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.q < 3 {
            return Err(AnalysisError::Field(format!("q={} is not an odd prime", self.q)));
        }
        if self.a == 0 || self.a >= self.q - 1 {
            return Err(AnalysisError::Exponent(format!("a={} must lie in 1..{}", self.a, self.q - 1)));
        }
        if self.b >= self.q - 1 {
            return Err(AnalysisError::Exponent(format!("b={} must lie in 0..{}", self.b, self.q - 1)));
        }
        Ok(())
    }
}

/// Full-order multiplicative character `chi(g) = e(1/(q-1))` of a small field.
#[derive(Debug, Clone)]
pub struct Characters {
    ctx: FieldCtx,
    logs: DlogTable,
}

impl Characters {
    pub fn new(q: u64) -> Result<Self, AnalysisError> {
        let ctx = FieldCtx::new(q, 0).map_err(|e| AnalysisError::Field(e.to_string()))?;
        let logs = DlogTable::new(&ctx).map_err(|e| AnalysisError::Field(e.to_string()))?;
        Ok(Characters { ctx, logs })
    }

    pub fn q(&self) -> u64 {
        self.ctx.q()
    }

    pub fn generator(&self) -> u64 {
        self.ctx.g()
    }

    pub fn log(&self, z: u64) -> Option<u64> {
        self.logs.log(z)
    }

    /// `chi^e` on all of `F_q`, with `chi^e(0) = zero_value`.
    pub fn table(&self, e: u64, zero_value: Complex64) -> Vec<Complex64> {
        let q = self.q();
        (0..q)
            .map(|z| match self.log(z) {
                None => zero_value,
                Some(l) => {
                    let k = (e as u128 * l as u128 % (q - 1) as u128) as f64;
                    Complex64::from_polar(1.0, 2.0 * PI * k / (q - 1) as f64)
                }
            })
            .collect()
    }
}

pub fn check_map(q: u64, a_map: &[u64], t: &[u64]) -> Result<(), AnalysisError> {
    if a_map.len() as u64 != q {
        return Err(AnalysisError::Shape(format!("map has {} entries, need {q}", a_map.len())));
    }
    if let Some(&v) = a_map.iter().find(|&&v| v >= q) {
        return Err(AnalysisError::Shape(format!("map value {v} outside F_{q}")));
    }
    check_elements(q, t)?;
    if let Some(&y) = t.iter().find(|&&y| a_map[y as usize] == y) {
        return Err(AnalysisError::FixedPoint(y));
    }
    Ok(())
}

pub(crate) fn check_elements(q: u64, set: &[u64]) -> Result<(), AnalysisError> {
    match set.iter().find(|&&v| v >= q) {
        Some(v) => Err(AnalysisError::Shape(format!("element {v} outside F_{q}"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corollary {
    pub eta: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakBound {
    pub r: u32,
    pub lambda: f64,
    pub bound: f64,
    pub pass: bool,
    /// `None` when the size hypotheses on `S`, `T` fail.
    pub corollary: Option<Corollary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharsumReport {
    pub spec: CharSpec,
    pub s_size: usize,
    pub t_size: usize,
    pub theta: f64,
    pub uniform_bound: f64,
    pub uniform_pass: bool,
    /// `Theta < 2 q^{5/4} |S|^{1/2}`; `None` for empty `S`.
    pub uniform_corollary: Option<Corollary>,
    pub weak: Vec<WeakBound>,
}

impl CharsumReport {
    pub fn pass(&self) -> bool {
        self.uniform_pass
            && self.uniform_corollary.as_ref().is_none_or(|c| c.pass)
            && self
                .weak
                .iter()
                .all(|w| w.pass && w.corollary.as_ref().is_none_or(|c| c.pass))
    }
}

/// `1 + floor(2 log q / log |T|)`; `None` when `|T| < 2`.
pub fn default_r(q: u64, t_size: usize) -> Option<u32> {
    (t_size >= 2).then(|| 1 + (2.0 * (q as f64).ln() / (t_size as f64).ln()).floor() as u32)
}

pub fn lambda_r(r: u32, q: u64, t_size: usize) -> f64 {
    let r = r as f64;
    ((4.0 * r - 1.0).powi(2) + (2.0 * r).powf(4.0 * r) * q as f64 * (t_size as f64).powf(-r)).powf(1.0 / (4.0 * r))
}

fn theta_with(chi_a: &[Complex64], chi_b: &[Complex64], q: u64, s: &[u64], t: &[u64], a_map: &[u64]) -> f64 {
    t.iter()
        .map(|&y| {
            let ay = a_map[y as usize];
            s.iter()
                .map(|&x| chi_a[((x + y) % q) as usize] * chi_b[((x + ay) % q) as usize])
                .sum::<Complex64>()
                .norm()
        })
        .sum()
}

/// `Theta = sum_{y in T} |sum_{s in S} chi_a(s+y) chi_b(s+A(y))|` with the
/// uniform-seed and weak-seed bound verdicts. `a_map[y]` is `A(y)`.
pub fn charsum_theta(
    spec: &CharSpec,
    chars: &Characters,
    s: &[u64],
    t: &[u64],
    a_map: &[u64],
    rs: &[u32],
) -> Result<CharsumReport, AnalysisError> {
    spec.validate()?;
    let q = spec.q;
    if chars.q() != q {
        return Err(AnalysisError::Field(format!("character table is for q={}, need {q}", chars.q())));
    }
    check_elements(q, s)?;
    check_map(q, a_map, t)?;
    let chi_a = chars.table(spec.a, Complex64::zero());
    let zero_b = match (spec.b, spec.zero_convention) {
        (0, ZeroConvention::One) => Complex64::new(1.0, 0.0),
        _ => Complex64::zero(),
    };
    let chi_b = chars.table(spec.b, zero_b);
    let theta = theta_with(&chi_a, &chi_b, q, s, t, a_map);
    Ok(bound_report(*spec, theta, s.len(), t.len(), rs))
}

fn bound_report(spec: CharSpec, theta: f64, s_size: usize, t_size: usize, rs: &[u32]) -> CharsumReport {
    let (qf, sf, tf) = (spec.q as f64, s_size as f64, t_size as f64);
    let uniform_bound = 11f64.powf(0.25) * qf.powf(1.25) * sf.sqrt();
    let uniform_corollary = (s_size > 0).then(|| {
        let eta = 2.0 * qf.powf(0.25) / sf.sqrt();
        let bound = eta * qf * sf;
        Corollary {
            eta,
            bound,
            pass: theta < bound + TOL,
        }
    });
    let weak = rs
        .iter()
        .map(|&r| {
            let rf = r as f64;
            let lambda = lambda_r(r, spec.q, t_size);
            let bound = lambda * qf.powf(1.0 / (4.0 * rf)) * sf.powf(1.0 - 1.0 / (2.0 * rf)) * tf;
            // smallest eta allowed by |S| >= 4r q^{1/2} / eta^{2r}
            let eta = (4.0 * rf * qf.sqrt() / sf).powf(1.0 / (2.0 * rf));
            let applies = s_size > 0 && eta <= 1.0 && tf >= (2.0 * rf).powi(4) * qf.powf(1.0 / rf);
            WeakBound {
                r,
                lambda,
                bound,
                pass: theta <= bound + TOL,
                corollary: applies.then_some(Corollary {
                    eta,
                    bound: eta * tf * sf,
                    pass: theta < eta * tf * sf + TOL,
                }),
            }
        })
        .collect();
    CharsumReport {
        spec,
        s_size,
        t_size,
        theta,
        uniform_pass: theta <= uniform_bound + TOL,
        uniform_bound,
        uniform_corollary,
        weak,
    }
}

/// Quadratic-character `Theta` via Euler's criterion, with no discrete logs.
/// Equals [`charsum_theta`] at `a = b = (q-1)/2`.
pub fn theta_quadratic(q: u64, s: &[u64], t: &[u64], a_map: &[u64]) -> Result<u64, AnalysisError> {
    check_elements(q, s)?;
    check_map(q, a_map, t)?;
    let chi: Vec<i64> = (0..q).map(|z| euler_char(z, q).value() as i64).collect();
    Ok(t.iter()
        .map(|&y| {
            let ay = a_map[y as usize];
            s.iter()
                .map(|&x| chi[((x + y) % q) as usize] * chi[((x + ay) % q) as usize])
                .sum::<i64>()
                .unsigned_abs()
        })
        .sum())
}

/// A monic polynomial over `F_q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Poly {
    /// `prod (x - c)^e` over distinct roots `c`.
    Roots(Vec<(u64, u64)>),
    /// Coefficients low to high, leading 1 implied when omitted; must be
    /// squarefree.
    Coeffs(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeilCheck {
    pub q: u64,
    pub a: u64,
    /// Order of `chi^a`.
    pub order: u64,
    /// Distinct roots over the algebraic closure.
    pub roots: u64,
    pub sum_abs: f64,
    pub bound: f64,
    pub pass: bool,
}

fn poly_trim(mut p: Vec<u64>) -> Vec<u64> {
    while p.last() == Some(&0) {
        p.pop();
    }
    p
}

fn poly_rem(mut a: Vec<u64>, b: &[u64], q: u64) -> Vec<u64> {
    let lead_inv = crate::ff::pow_mod(*b.last().expect("nonzero divisor"), q - 2, q);
    while a.len() >= b.len() {
        let c = crate::ff::mul_mod(*a.last().expect("nonempty"), lead_inv, q);
        let shift = a.len() - b.len();
        for (i, &bi) in b.iter().enumerate() {
            a[shift + i] = (a[shift + i] + q - crate::ff::mul_mod(c, bi, q)) % q;
        }
        a = poly_trim(a);
    }
    a
}

fn poly_gcd_degree(a: Vec<u64>, b: Vec<u64>, q: u64) -> usize {
    let (mut a, mut b) = (poly_trim(a), poly_trim(b));
    while !b.is_empty() {
        let r = poly_rem(a, &b, q);
        a = b;
        b = r;
    }
    a.len().saturating_sub(1)
}

pub fn is_squarefree(coeffs: &[u64], q: u64) -> bool {
    let f = poly_trim(coeffs.iter().map(|c| c % q).collect());
    let df: Vec<u64> = f.iter().enumerate().skip(1).map(|(i, &c)| crate::ff::mul_mod(i as u64 % q, c, q)).collect();
    let df = poly_trim(df);
    if df.is_empty() {
        return f.len() <= 1;
    }
    poly_gcd_degree(f, df, q) == 0
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `|sum_x chi^a(f(x))|` against `(roots - 1) sqrt(q)`, with `chi(0) = 0`.
pub fn weil_check(chars: &Characters, f: &Poly, a: u64) -> Result<WeilCheck, AnalysisError> {
    let q = chars.q();
    let d = q - 1;
    let order = d / gcd(a % d, d);
    let chi = chars.table(a, Complex64::zero());
    let (sum, roots) = match f {
        Poly::Roots(rs) => {
            let mut seen: Vec<u64> = rs.iter().map(|r| r.0).collect();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != rs.len() || seen.iter().any(|&c| c >= q) {
                return Err(AnalysisError::Poly("roots must be distinct elements of F_q".into()));
            }
            if rs.iter().all(|&(_, e)| (a as u128 * e as u128).is_multiple_of(d as u128)) {
                return Err(AnalysisError::Poly("polynomial is a power of the character order".into()));
            }
            let sum: Complex64 = (0..q)
                .map(|x| {
                    rs.iter()
                        .map(|&(c, e)| {
                            let z = (x + q - c) % q;
                            match chars.log(z) {
                                None => Complex64::zero(),
                                Some(_) => chi[z as usize].powu((e % d) as u32),
                            }
                        })
                        .product::<Complex64>()
                })
                .sum();
            (sum, rs.len() as u64)
        }
        Poly::Coeffs(cs) => {
            let mut cs: Vec<u64> = cs.iter().map(|c| c % q).collect();
            if cs.last() != Some(&1) {
                cs.push(1);
            }
            let deg = cs.len() as u64 - 1;
            if deg == 0 {
                return Err(AnalysisError::Poly("constant polynomial".into()));
            }
            if !is_squarefree(&cs, q) {
                return Err(AnalysisError::Poly("coefficient form must be squarefree".into()));
            }
            if order == 1 {
                return Err(AnalysisError::Poly("trivial character".into()));
            }
            let sum: Complex64 = (0..q)
                .map(|x| {
                    let v = cs.iter().rev().fold(0u64, |acc, &c| (crate::ff::mul_mod(acc, x, q) + c) % q);
                    chi[v as usize]
                })
                .sum();
            (sum, deg)
        }
    };
    let bound = (roots as f64 - 1.0) * (q as f64).sqrt();
    let sum_abs = sum.norm();
    Ok(WeilCheck {
        q,
        a,
        order,
        roots,
        sum_abs,
        bound,
        pass: sum_abs <= bound + TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::SliceRandom, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shift_map(q: u64, c: u64) -> Vec<u64> {
        (0..q).map(|y| (y + c) % q).collect()
    }

    #[test]
    fn theta_hand_example() {
        let chars = Characters::new(3).unwrap();
        let all: Vec<u64> = (0..3).collect();
        let spec = CharSpec::new(3, 1, 0).unwrap();
        let r = charsum_theta(&spec, &chars, &all, &all, &shift_map(3, 1), &[1]).unwrap();
        assert!((r.theta - 3.0).abs() < 1e-9);
        assert!((r.uniform_bound - 12.45).abs() < 0.01);
        assert!(r.pass());
    }

    #[test]
    fn theta_edge_cases() {
        let chars = Characters::new(13).unwrap();
        let all: Vec<u64> = (0..13).collect();
        let spec = CharSpec::new(13, 6, 0).unwrap();
        let r = charsum_theta(&spec, &chars, &[], &all, &shift_map(13, 1), &[]).unwrap();
        assert_eq!(r.theta, 0.0);
        assert!(r.uniform_corollary.is_none());
        let mut affine: Vec<u64> = (0..13).map(|y| (2 * y + 1) % 13).collect();
        assert!(matches!(
            charsum_theta(&spec, &chars, &all, &all, &affine, &[]),
            Err(AnalysisError::FixedPoint(12))
        ));
        affine[12] = 0;
        let r = charsum_theta(&spec, &chars, &all, &all, &affine, &[1, 2]).unwrap();
        assert!(r.theta <= 162.0 && r.pass(), "{r:?}");
        assert!(CharSpec::new(13, 0, 1).is_err());
        assert!(CharSpec::new(13, 12, 1).is_err());
    }

    #[test]
    fn zero_convention_changes_only_b_zero() {
        let chars = Characters::new(11).unwrap();
        let all: Vec<u64> = (0..11).collect();
        let map = shift_map(11, 3);
        let mut spec = CharSpec::new(11, 2, 0).unwrap();
        let zero = charsum_theta(&spec, &chars, &all, &all, &map, &[]).unwrap().theta;
        spec.zero_convention = ZeroConvention::One;
        let one = charsum_theta(&spec, &chars, &all, &all, &map, &[]).unwrap().theta;
        // with chi_0 = 1 everywhere the inner sum is a full character sum
        assert!(one.abs() < 1e-9);
        assert!(zero > 1.0);
    }

    #[test]
    fn quadratic_cross_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for q in [3u64, 5, 7, 11, 13, 17, 19, 23, 29, 31] {
            let chars = Characters::new(q).unwrap();
            let mut s: Vec<u64> = (0..q).collect();
            s.shuffle(&mut rng);
            s.truncate((q as usize).div_ceil(2));
            let all: Vec<u64> = (0..q).collect();
            let map = shift_map(q, 2);
            let h = (q - 1) / 2;
            let spec = CharSpec::new(q, h, h).unwrap();
            let via_logs = charsum_theta(&spec, &chars, &s, &all, &map, &[]).unwrap().theta;
            let via_euler = theta_quadratic(q, &s, &all, &map).unwrap();
            assert!((via_logs - via_euler as f64).abs() < 1e-9, "q={q}");
        }
    }

    #[test]
    fn default_r_and_lambda() {
        assert_eq!(default_r(101, 1), None);
        assert_eq!(default_r(101, 101), Some(3));
        assert_eq!(default_r(101, 11), Some(4));
        // r = 1 with T = F_q: ((3^2) + 16)^{1/4}
        assert!((lambda_r(1, 7, 7) - 25f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn weil_examples() {
        let chars = Characters::new(5).unwrap();
        let lin = weil_check(&chars, &Poly::Roots(vec![(3, 1)]), 1).unwrap();
        assert!(lin.sum_abs < 1e-9 && lin.pass);
        let quad = weil_check(&chars, &Poly::Roots(vec![(0, 2), (1, 2)]), 1).unwrap();
        assert!((quad.sum_abs - 1.0).abs() < 1e-9);
        assert!(quad.pass && quad.order == 4);
        assert!(weil_check(&chars, &Poly::Roots(vec![(2, 4)]), 1).is_err());
        assert!(weil_check(&chars, &Poly::Roots(vec![(2, 1), (2, 1)]), 1).is_err());
        // x^2 - 2 has no roots in F_5 but two over the closure
        let irr = weil_check(&chars, &Poly::Coeffs(vec![3, 0, 1]), 2).unwrap();
        assert_eq!(irr.roots, 2);
        assert!((irr.sum_abs - 1.0).abs() < 1e-9 && irr.pass);
        assert!(weil_check(&chars, &Poly::Coeffs(vec![1, 2, 1]), 2).is_err());
        assert!(weil_check(&chars, &Poly::Coeffs(vec![3, 0, 1]), 4).is_err());
    }

    #[test]
    fn squarefree_detection() {
        // (x-1)^2 = x^2 - 2x + 1
        assert!(!is_squarefree(&[1, 5, 1], 7));
        assert!(is_squarefree(&[0, 6, 1], 7));
        // (x-1)^2 (x-2) = x^3 - 4x^2 + 5x - 2
        assert!(!is_squarefree(&[5, 5, 3, 1], 7));
        assert!(is_squarefree(&[1, 1, 0, 1], 7));
    }
}
