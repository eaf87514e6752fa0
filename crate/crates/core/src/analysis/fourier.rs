use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use super::dist::{ratio, stat_distance, to_f64, Distribution, JointTable, Value};
use super::{AnalysisError, TOL};

/// Largest `N` accepted by [`l1_fourier_norm_check`].
pub const MAX_L1_N: u64 = 4096;

fn square_side(j: &JointTable) -> Result<usize, AnalysisError> {
    match j.axes()[..] {
        [(_, a), (_, b)] if a == b => Ok(a),
        _ => Err(AnalysisError::Shape("need a square table on Z_M x Z_M".into())),
    }
}

fn unit(k: usize, m: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (k % m) as f64 / m as f64)
}

/// `max |E[phi_j(W) phi'_k(W')]|` over `j != 0` and all `k`, for a table
/// whose first axis is `W`.
pub fn fourier_alpha(j: &JointTable) -> Result<f64, AnalysisError> {
    let m = square_side(j)?;
    let p: Vec<f64> = j.probs().iter().map(to_f64).collect();
    let roots: Vec<Complex64> = (0..m).map(|k| unit(k, m)).collect();
    let mut alpha = 0.0f64;
    for a in 1..m {
        for b in 0..m {
            let mut acc = Complex64::zero();
            for w in 0..m {
                for w2 in 0..m {
                    acc += p[w * m + w2] * roots[(a * w + b * w2) % m];
                }
            }
            alpha = alpha.max(acc.norm());
        }
    }
    Ok(alpha)
}

/// `(W, W') - (U, W')` as an exact table.
fn difference(j: &JointTable) -> Result<Vec<BigRational>, AnalysisError> {
    let m = square_side(j)?;
    let axes = j.axes();
    let w2 = j.marginal(&[axes[1].0])?;
    let uniform = ratio(1, m as u64);
    Ok(j.probs()
        .iter()
        .enumerate()
        .map(|(i, p)| p - &uniform * &w2.probs()[i % m])
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XorCheck {
    pub group: usize,
    pub alpha: f64,
    /// `Delta((W, W'), (U, W'))`.
    pub distance: Value,
    pub distance_bound: f64,
    pub sup_norm: Value,
    pub distance_pass: bool,
    pub sup_pass: bool,
    pub pass: bool,
}

pub fn xor_lemma_check(j: &JointTable) -> Result<XorCheck, AnalysisError> {
    let m = square_side(j)?;
    let alpha = fourier_alpha(j)?;
    let f = difference(j)?;
    let l1: BigRational = f.iter().map(num_traits::Signed::abs).sum();
    let distance = Value::exact(l1 / ratio(2, 1));
    let sup = f.iter().map(num_traits::Signed::abs).max().unwrap_or_else(BigRational::zero);
    let sup_norm = Value::exact(sup);
    let distance_bound = alpha * m as f64;
    let distance_pass = distance.value <= distance_bound + TOL;
    let sup_pass = sup_norm.value <= alpha + TOL;
    Ok(XorCheck {
        group: m,
        alpha,
        distance,
        distance_bound,
        sup_norm,
        distance_pass,
        sup_pass,
        pass: distance_pass && sup_pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralXorRatio {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    /// `Delta((h(W), h(W')), (U_M, h(W')))`.
    pub distance: Value,
    /// `distance / (alpha M ln N + M/N)`; the constant is not pinned down,
    /// so no verdict is attached.
    pub ratio: f64,
}

/// Pushes a table on `Z_N x Z_N` through `x -> x mod M` and measures the
/// distance against the `alpha M log N + M/N` shape.
pub fn general_xor_ratio(j: &JointTable, m: usize) -> Result<GeneralXorRatio, AnalysisError> {
    let n = square_side(j)?;
    if m == 0 || m > n {
        return Err(AnalysisError::Shape(format!("need 1 <= M <= N, got M={m}, N={n}")));
    }
    let alpha = fourier_alpha(j)?;
    let mut pushed = vec![BigRational::zero(); m * m];
    for (i, p) in j.probs().iter().enumerate() {
        pushed[(i / n % m) * m + i % n % m] += p;
    }
    let h = JointTable::new(&[("w", m), ("w2", m)], pushed)?;
    let f = difference(&h)?;
    let l1: BigRational = f.iter().map(num_traits::Signed::abs).sum();
    let distance = Value::exact(l1 / ratio(2, 1));
    let shape = alpha * m as f64 * (n as f64).ln() + m as f64 / n as f64;
    Ok(GeneralXorRatio {
        n,
        m,
        alpha,
        ratio: distance.value / shape,
        distance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidueCheck {
    pub n: u64,
    pub m: u64,
    pub distance: Value,
    pub bound: Value,
    pub pass: bool,
}

/// Exact `Delta(U_N mod M, U_M)` against `2M/N`.
pub fn residue_map_distance(n: u64, m: u64) -> Result<ResidueCheck, AnalysisError> {
    if m == 0 || m > n {
        return Err(AnalysisError::Shape(format!("need 1 <= M <= N, got M={m}, N={n}")));
    }
    let counts: Vec<u64> = (0..m).map(|r| n / m + u64::from(r < n % m)).collect();
    let h = Distribution::from_counts(&counts)?;
    let distance = stat_distance(&h, &Distribution::uniform(m as usize)?)?;
    let bound = ratio(2 * m, n);
    let pass = distance.exact.as_ref().expect("exact inputs") <= &bound;
    Ok(ResidueCheck {
        n,
        m,
        distance,
        bound: Value::exact(bound),
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Norm {
    pub j: u64,
    pub norm: f64,
    /// `norm / (N ln N)`.
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Check {
    pub n: u64,
    pub m: u64,
    pub c_max: f64,
    pub bound: f64,
    pub norms: Vec<L1Norm>,
    pub pass: bool,
}

/// `sum_k |sum_x phi_j(x mod M) e(-kx/N)|` for one character `phi_j` of `Z_M`.
fn l1_norm(n: u64, m: u64, j: u64) -> f64 {
    // phi_j(x mod M) = e(jx/M), so each coefficient is a geometric sum
    let num = (PI * ((n as u128 * j as u128) % m as u128) as f64 / m as f64).sin().abs();
    (0..n)
        .map(|k| {
            let mn = m as i128 * n as i128;
            let diff = (j as i128 * n as i128 - k as i128 * m as i128).rem_euclid(mn);
            if diff == 0 {
                n as f64
            } else {
                num / (PI * diff as f64 / mn as f64).sin().abs()
            }
        })
        .sum()
}

pub fn l1_fourier_norm_check(n: u64, m: u64, c_max: f64) -> Result<L1Check, AnalysisError> {
    if m == 0 || m > n || n > MAX_L1_N {
        return Err(AnalysisError::Shape(format!(
            "need 1 <= M <= N <= {MAX_L1_N}, got M={m}, N={n}"
        )));
    }
    let scale = n as f64 * (n as f64).ln();
    let bound = c_max * scale;
    let norms: Vec<L1Norm> = (0..m)
        .map(|j| {
            let norm = l1_norm(n, m, j);
            L1Norm {
                j,
                norm,
                ratio: norm / scale,
                pass: norm <= bound + TOL,
            }
        })
        .collect();
    Ok(L1Check {
        n,
        m,
        c_max,
        bound,
        pass: norms.iter().all(|x| x.pass),
        norms,
    })
}
