use serde::{Deserialize, Serialize};

use crate::condense::padded_len;

use super::ProtocolError;

/// Slack added to `log2(C/eps)` when fixing the auxiliary security parameter.
pub const S_SLACK: u32 = 4;

/// Every length used by the protocols, derived from `(n, delta, epsilon, t_cond)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n: u32,
    pub delta: f64,
    pub epsilon: f64,
    pub s: u32,
    pub t_cond: u32,
    #[serde(rename = "C")]
    pub c: u32,
    pub n_row: u32,
    /// Output length of the non-malleable extractor, `m' = 4s`.
    pub m_nm: u32,
    /// Tag length of the seed MAC, `v' = s + ceil(log2 d)`.
    pub v_small: u32,
    /// Tag length of the leakage-resilient MAC, `v = 2v'`.
    pub v_big: u32,
    /// Key length of the leakage-resilient MAC, `l = 2v`.
    pub ell: u32,
    /// `floor(delta * n)`.
    pub k: u32,
    /// `k - (7C + 11)s`; negative at toy scale.
    pub k_prime: i64,
    pub d_seed: u32,
    pub m_out: u32,
    pub checked: bool,
}

/// `ceil(log2 d)` for `d >= 1`.
pub fn ceil_log2(d: u32) -> u32 {
    if d <= 1 {
        0
    } else {
        32 - (d - 1).leading_zeros()
    }
}

fn security_parameter(c: u32, epsilon: f64) -> u32 {
    let x = (c as f64).log2() - epsilon.log2();
    // exact powers of two come out a hair above the integer
    (x - 1e-9).ceil().max(0.0) as u32 + S_SLACK
}

/// Derives the parameter ledger. Checked mode refuses sets whose entropy
/// accounting does not close; unchecked mode clamps the final key length
/// to `max(k' - 2s, s)` so the mechanics stay runnable at small `n`.
pub fn derive_params(
    n: u32,
    delta: f64,
    epsilon: f64,
    t_cond: u32,
    checked: bool,
) -> Result<ProtocolParams, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::BadArgument("n must be positive".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ProtocolError::BadArgument(format!("delta={delta} outside (0, 1)")));
    }
    if !(epsilon < 1.0 && epsilon > 0.0 && epsilon.log2() > -(n as f64)) {
        return Err(ProtocolError::BadArgument(format!(
            "epsilon={epsilon} outside (2^-{n}, 1)"
        )));
    }
    if t_cond > 8 {
        return Err(ProtocolError::BadArgument(format!("t_cond={t_cond} too large")));
    }
    let c = 4u32.pow(t_cond);
    let s = security_parameter(c, epsilon);
    let d_seed = n;
    let v_small = s + ceil_log2(d_seed);
    let v_big = 2 * v_small;
    let k = (delta * n as f64).floor() as u32;
    let k_prime = k as i64 - (7 * c as i64 + 11) * s as i64;
    let m_out = if checked {
        if k_prime <= 0 {
            return Err(ProtocolError::Infeasible(format!(
                "k' = {k_prime} <= 0; use unchecked mode at this scale"
            )));
        }
        let m = k_prime - 2 * s as i64;
        if m <= 0 {
            return Err(ProtocolError::Infeasible(format!("final key length {m} <= 0")));
        }
        if ceil_log2(d_seed) > s {
            return Err(ProtocolError::Infeasible(format!(
                "seed length {d_seed} exceeds 2^s; the seed MAC key would not fit in m' = 4s"
            )));
        }
        m as u32
    } else {
        (k_prime - 2 * s as i64).max(s as i64).min(n as i64) as u32
    };
    Ok(ProtocolParams {
        n,
        delta,
        epsilon,
        s,
        t_cond,
        c,
        n_row: padded_len(n, t_cond) / 3u32.pow(t_cond),
        m_nm: 4 * s,
        v_small,
        v_big,
        ell: 2 * v_big,
        k,
        k_prime,
        d_seed,
        m_out,
        checked,
    })
}
