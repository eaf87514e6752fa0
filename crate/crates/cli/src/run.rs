use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use nmext_core::analysis::{
    charsum_sweep, l1norm_sweep, nm_distance, nm_sweep, odd_primes_up_to, residue_sweep, weil_sweep, worker_cap,
    xor_sweep, AnalysisError, CharsumSweep, NmSweep, NmVariant, SweepReport,
};
use nmext_core::dlog::{dlog_pow2, DlogError, BRUTE_FORCE_CAP};
use nmext_core::extract::{BitString, BitsError};
use nmext_core::ff::{
    factorize, find_prime_1_mod_m_above, mul_mod, next_prime_above, pow_mod, FfError, FieldCtx, DEFAULT_SEARCH_CAP,
};
use nmext_core::harness::{check_frequency, run_trial, run_trials, HarnessError, SourceModel, StrategySpec};
use nmext_core::mac::{mac_max_forgery, Mac, MacError, MacParams};
use nmext_core::protocol::{derive_params, Flavor, ProtocolError, Setup};

use crate::args::*;
use crate::{CliConfig, CliError};

/// Report plus the process exit status: 0 when every verdict passes, 1 when
/// one fails, 2 on errors.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub report: Value,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Verdict {
    name: String,
    pass: bool,
}

fn verdict(name: &str, pass: bool) -> Verdict {
    Verdict {
        name: name.to_string(),
        pass,
    }
}

#[derive(Debug)]
struct RunError {
    kind: &'static str,
    message: String,
}

macro_rules! run_error_from {
    ($($t:ty => $kind:literal),* $(,)?) => {
        $(impl From<$t> for RunError {
            fn from(e: $t) -> Self {
                RunError { kind: $kind, message: e.to_string() }
            }
        })*
    };
}

run_error_from!(
    FfError => "field",
    DlogError => "dlog",
    BitsError => "bits",
    MacError => "mac",
    ProtocolError => "protocol",
    HarnessError => "harness",
    AnalysisError => "analysis",
    std::io::Error => "io",
);

fn bad(message: impl Into<String>) -> RunError {
    RunError {
        kind: "argument",
        message: message.into(),
    }
}

type Outcome = Result<(Value, Vec<Verdict>), RunError>;

fn schema(config: &CliConfig, message: impl Into<String>) -> CliError {
    CliError::Schema {
        command: config.command_name(),
        message: message.into(),
    }
}

fn required<T: Copy>(config: &CliConfig, v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| schema(config, format!("--{flag} is required")))
}

/// Fills defaults and rejects combinations the flags alone cannot express.
pub(crate) fn resolve(config: &mut CliConfig) -> Result<(), CliError> {
    let snapshot = config.clone();
    let c = &snapshot;
    match &mut config.command {
        Command::Findprime(a) => {
            required(c, a.m, "m")?;
            a.above.get_or_insert(0);
        }
        Command::Nmext(a) => {
            for (v, f) in [(a.q, "q"), (a.x, "x"), (a.y, "y")] {
                required(c, v, f)?;
            }
            a.m.get_or_insert(1);
        }
        Command::Dlog(a) => {
            required(c, a.q, "q")?;
            required(c, a.x, "x")?;
        }
        Command::Mac(a) => {
            a.v.get_or_insert(4);
            a.d.get_or_insert(8);
            if a.key.is_none() || a.msg.is_none() {
                return Err(schema(c, "--key and --msg are required"));
            }
        }
        Command::Protocol(ProtocolCmd::Run(a)) => {
            if a.checked == Some(true) && a.unchecked == Some(true) {
                return Err(schema(c, "checked and unchecked both set"));
            }
            let unchecked = a.unchecked.unwrap_or(a.checked != Some(true));
            a.unchecked = Some(unchecked);
            a.checked = None;
            a.strategy.get_or_insert_with(|| "passive".into());
            a.trials.get_or_insert(1000);
            a.seed.get_or_insert(0);
            a.flavor.get_or_insert_with(|| "multi_phase".into());
            a.n.get_or_insert(96);
            a.delta.get_or_insert(0.5);
            a.epsilon.get_or_insert(0.25);
            a.t_cond.get_or_insert(1);
            a.post_application.get_or_insert(false);
            a.strategy_cfg.get_or_insert_with(Default::default);
            a.source.get_or_insert(SourceModel::Uniform);
        }
        Command::Params(a) => {
            required(c, a.n, "n")?;
            a.delta.get_or_insert(0.5);
            a.epsilon.get_or_insert(0.25);
            a.t_cond.get_or_insert(1);
            a.unchecked.get_or_insert(false);
        }
        Command::Verify(v) => match v {
            VerifyCmd::Charsum(a) => {
                a.qmax.get_or_insert(101);
                a.seed.get_or_insert(1);
            }
            VerifyCmd::Weil(a) => {
                if a.q.is_some() && a.qmax.is_some() {
                    return Err(schema(c, "q and qmax both set"));
                }
                if a.q.is_none() {
                    a.qmax.get_or_insert(13);
                }
            }
            VerifyCmd::Nm(a) => {
                if a.q.is_some() && a.qmax.is_some() {
                    return Err(schema(c, "q and qmax both set"));
                }
                a.seed.get_or_insert(1);
                if a.qmax.is_some() {
                    if a.k.is_some() || a.m.is_some_and(|m| m != 1) || a.variant.as_deref().is_some_and(|v| v != "bit") {
                        return Err(schema(c, "the sweep fixes m, k and the variant"));
                    }
                    a.m = Some(1);
                    a.variant = Some("bit".into());
                    a.trials.get_or_insert(10);
                } else {
                    if a.trials.is_some() {
                        return Err(schema(c, "--trials applies to the --qmax sweep"));
                    }
                    if a.q.is_none() {
                        a.q = Some(next_prime_above(4096).expect("small search"));
                    }
                    let m = *a.m.get_or_insert(1);
                    a.k.get_or_insert(11);
                    a.variant.get_or_insert_with(|| if m == 1 { "bit" } else { "dlog" }.into());
                }
            }
            VerifyCmd::Xor(a) => {
                a.trials.get_or_insert(100);
                a.m.get_or_insert(4);
                a.seed.get_or_insert(1);
            }
            VerifyCmd::ResidueMap(a) => {
                a.nmax.get_or_insert(64);
            }
            VerifyCmd::L1norm(a) => {
                a.nmax.get_or_insert(64);
                a.c_max.get_or_insert(8.0);
            }
            VerifyCmd::Mac(a) => {
                a.v.get_or_insert(4);
                a.d.get_or_insert(8);
            }
        },
    }
    Ok(())
}

/// Runs a resolved config. Sweeps honor the worker cap.
pub fn execute(config: &CliConfig) -> Execution {
    let run = || dispatch(&config.command);
    let outcome = match worker_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(run),
        None => run(),
    };
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut report = json!({
        "command": config.command_name(),
        "config": config,
        "timestamp": timestamp,
    });
    let exit_code = match outcome {
        Ok((result, verdicts)) => {
            let pass = verdicts.iter().all(|v| v.pass);
            report["result"] = result;
            report["verdicts"] = json!(verdicts);
            report["pass"] = json!(pass);
            if pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            report["error"] = json!({"kind": e.kind, "message": e.message});
            report["pass"] = json!(false);
            2
        }
    };
    Execution { report, exit_code }
}

fn dispatch(cmd: &Command) -> Outcome {
    match cmd {
        Command::Findprime(a) => findprime(a),
        Command::Nmext(a) => nmext(a),
        Command::Dlog(a) => dlog(a),
        Command::Mac(a) => mac(a),
        Command::Protocol(ProtocolCmd::Run(a)) => protocol(a),
        Command::Params(a) => params(a),
        Command::Verify(v) => match v {
            VerifyCmd::Charsum(a) => verify_charsum(a),
            VerifyCmd::Weil(a) => {
                let qs = match (a.q, a.qmax) {
                    (Some(q), _) => vec![q],
                    (None, qmax) => odd_primes_up_to(qmax.unwrap_or(13)).into_iter().filter(|&q| q >= 5).collect(),
                };
                if let Some(&q) = qs.iter().find(|&&q| q < 3 || !nmext_core::ff::is_prime(q)) {
                    return Err(bad(format!("q={q} is not an odd prime")));
                }
                sweep("weil_bound", weil_sweep(&qs, &[2, 3])?)
            }
            VerifyCmd::Nm(a) => verify_nm(a),
            VerifyCmd::Xor(a) => {
                let m = a.m.unwrap_or(4) as usize;
                if m < 2 {
                    return Err(bad("--m must be at least 2"));
                }
                sweep("xor_lemma", xor_sweep(a.trials.unwrap_or(100) as usize, m, a.seed.unwrap_or(1))?)
            }
            VerifyCmd::ResidueMap(a) => sweep("residue_map", residue_sweep(a.nmax.unwrap_or(64))?),
            VerifyCmd::L1norm(a) => sweep("l1_norm", l1norm_sweep(a.nmax.unwrap_or(64), a.c_max.unwrap_or(8.0))?),
            VerifyCmd::Mac(a) => verify_mac(a),
        },
    }
}

fn sweep(name: &str, r: SweepReport) -> Outcome {
    let pass = r.pass;
    Ok((json!(r), vec![verdict(name, pass)]))
}

fn findprime(a: &FindPrimeArgs) -> Outcome {
    let m = a.m.unwrap_or(0);
    if !(1..=62).contains(&m) {
        return Err(bad("--m must lie in 1..=62"));
    }
    let found = find_prime_1_mod_m_above(1 << m, a.above.unwrap_or(0), DEFAULT_SEARCH_CAP)?;
    Ok((json!({"q": found.q, "index": found.index, "M": 1u64 << m}), vec![]))
}

fn check_generator(q: u64, g: u64) -> Result<(), RunError> {
    let mut ps = factorize(q - 1)?;
    ps.dedup();
    if g == 0 || g >= q || ps.iter().any(|&p| pow_mod(g, (q - 1) / p, q) == 1) {
        return Err(bad(format!("g={g} does not generate F_{q}^x")));
    }
    Ok(())
}

/// Inverse of an odd `e` modulo `2^64`.
fn inverse_odd(e: u64) -> u64 {
    let mut inv = e;
    for _ in 0..5 {
        inv = inv.wrapping_mul(2u64.wrapping_sub(e.wrapping_mul(inv)));
    }
    inv
}

/// `log_g z mod 2^m` for any generator, by rebasing the context's logarithm.
fn log_pow2_base(z: u64, g: u64, ctx: &FieldCtx) -> Result<u64, RunError> {
    let mask = (1u64 << ctx.m()) - 1;
    let ez = dlog_pow2(z, ctx)?;
    let eg = dlog_pow2(g, ctx)?;
    Ok(ez.wrapping_mul(inverse_odd(eg)) & mask)
}

fn nmext(a: &NmextArgs) -> Outcome {
    let (q, m) = (a.q.unwrap_or(0), a.m.unwrap_or(1));
    if m == 0 {
        return Err(bad("--m must be at least 1"));
    }
    let ctx = FieldCtx::dlog_mode(q, m)?;
    let g = a.g.unwrap_or(ctx.g());
    check_generator(q, g)?;
    let (x, y) = (a.x.unwrap_or(0) % q, a.y.unwrap_or(0) % q);
    let z = ctx.add(x, y);
    let value = if z == 0 { 0 } else { log_pow2_base(z, g, &ctx)? };
    let out = BitString::new(value as u128, m)?;
    Ok((
        json!({"q": q, "g": g, "m": m, "x": x, "y": y, "sum": z, "designated_zero": z == 0, "value": value, "output": out, "bits": out.bits()}),
        vec![],
    ))
}

fn dlog(a: &DlogArgs) -> Outcome {
    let (q, z) = (a.q.unwrap_or(0), a.x.unwrap_or(0));
    let ctx = FieldCtx::new(q, a.m.unwrap_or(0))?;
    let g = a.g.unwrap_or(ctx.g());
    check_generator(q, g)?;
    if z == 0 || z >= q {
        return Err(bad(format!("x={z} must lie in 1..{q}")));
    }
    let brute = (q <= BRUTE_FORCE_CAP).then(|| {
        let mut acc = 1u64;
        (0..q - 1)
            .find(|_| {
                let hit = acc == z;
                acc = mul_mod(acc, g, q);
                hit
            })
            .expect("g generates the group")
    });
    let pow2 = match a.m {
        Some(m) if m > 0 => {
            let ctx = FieldCtx::dlog_mode(q, m)?;
            Some(log_pow2_base(z, g, &ctx)?)
        }
        _ => None,
    };
    let mut verdicts = vec![];
    if let (Some(b), Some(p), Some(m)) = (brute, pow2, a.m) {
        verdicts.push(verdict("pohlig_hellman_matches_scan", b % (1 << m) == p));
    }
    Ok((json!({"q": q, "g": g, "x": z, "log": brute, "log_mod_2m": pow2}), verdicts))
}

fn parse_bits(s: &str, flag: &str) -> Result<BitString, RunError> {
    s.parse().map_err(|e: BitsError| bad(format!("--{flag}: {e}")))
}

fn mac(a: &MacArgs) -> Outcome {
    let params = MacParams::new(a.v.unwrap_or(4), a.d.unwrap_or(8))?;
    let mac = Mac::new(params)?;
    let key = parse_bits(a.key.as_deref().unwrap_or_default(), "key")?;
    let msg = parse_bits(a.msg.as_deref().unwrap_or_default(), "msg")?;
    let tag = mac.tag(&key, &msg)?;
    let ok = mac.verify(&key, &msg, &tag)?;
    Ok((
        json!({"params": params, "key": key, "msg": msg, "tag": tag}),
        vec![verdict("tag_verifies", ok)],
    ))
}

fn flavor(name: &str) -> Result<Flavor, RunError> {
    serde_json::from_value(json!(name)).map_err(|_| bad(format!("unknown flavor {name:?}; use two_round or multi_phase")))
}

fn protocol(a: &ProtocolArgs) -> Outcome {
    let p = derive_params(
        a.n.unwrap_or(96),
        a.delta.unwrap_or(0.5),
        a.epsilon.unwrap_or(0.25),
        a.t_cond.unwrap_or(1),
        !a.unchecked.unwrap_or(true),
    )?;
    let flavor = flavor(a.flavor.as_deref().unwrap_or("multi_phase"))?;
    let setup = Arc::new(Setup::new(p.clone(), flavor)?);
    let spec = StrategySpec {
        name: a.strategy.clone().unwrap_or_else(|| "passive".into()),
        cfg: a.strategy_cfg.clone().unwrap_or_default(),
    };
    let source = a.source.clone().unwrap_or(SourceModel::Uniform);
    let (trials, seed, post) = (a.trials.unwrap_or(1000), a.seed.unwrap_or(0), a.post_application.unwrap_or(false));
    let stats = run_trials(&setup, &source, &spec, trials, seed, post)?;
    if let Some(path) = &a.transcript {
        let o = run_trial(&setup, &source.build(p.n)?, &spec, seed, 0, post)?;
        std::fs::write(path, o.transcript_jsonl())?;
    }
    let mut checks = serde_json::Map::new();
    let mut verdicts = vec![];
    match (spec.name.as_str(), flavor) {
        ("passive", _) => {
            verdicts.push(verdict(
                "correctness",
                stats.both_accept == trials && stats.robustness_broken == 0,
            ));
        }
        ("substitute_W", Flavor::TwoRound) => {
            let bound = p.d_seed.div_ceil(p.v_small) as f64 * 2f64.powi(-(p.v_small as i32));
            let c = check_frequency(stats.alice_accepted_modified, trials, bound);
            checks.insert("mac_forgery".into(), json!(c));
            verdicts.push(verdict("mac_forgery", c.pass));
        }
        ("desync_skip_alice" | "replay", Flavor::MultiPhase) => {
            let bound = 3.0 * p.c as f64 * 2f64.powi(-(p.s as i32));
            let c = check_frequency(stats.bob_accept, trials, bound);
            checks.insert("synchrony".into(), json!(c));
            verdicts.push(verdict("synchrony", c.pass));
        }
        _ => {}
    }
    Ok((
        json!({"params": p, "flavor": flavor, "layout": setup.layout(), "stats": stats, "checks": checks}),
        verdicts,
    ))
}

fn params(a: &ParamsArgs) -> Outcome {
    let p = derive_params(
        a.n.unwrap_or(0),
        a.delta.unwrap_or(0.5),
        a.epsilon.unwrap_or(0.25),
        a.t_cond.unwrap_or(1),
        !a.unchecked.unwrap_or(false),
    )?;
    let runnable = |f: Flavor| match Setup::new(p.clone(), f) {
        Ok(_) => json!(true),
        Err(e) => json!(e.to_string()),
    };
    Ok((
        json!({"params": p, "runnable": {"two_round": runnable(Flavor::TwoRound), "multi_phase": runnable(Flavor::MultiPhase)}}),
        vec![],
    ))
}

fn verify_charsum(a: &CharsumArgs) -> Outcome {
    let (qmax, seed) = (a.qmax.unwrap_or(101), a.seed.unwrap_or(1));
    let uniform = charsum_sweep(&CharsumSweep::uniform(qmax, seed))?;
    let mut verdicts = vec![verdict("uniform_seed_bound", uniform.pass)];
    let mut result = json!({"uniform": uniform});
    if let Some(rs) = &a.r {
        if rs.contains(&0) {
            return Err(bad("--r values must be positive"));
        }
        let mut cfg = CharsumSweep::weak(qmax, seed, rs.clone());
        cfg.weak_subsets = 2;
        let weak = charsum_sweep(&cfg)?;
        verdicts.push(verdict("weak_seed_bound", weak.pass));
        result["weak"] = json!(weak);
    }
    Ok((result, verdicts))
}

fn verify_nm(a: &NmArgs) -> Outcome {
    let seed = a.seed.unwrap_or(1);
    if let Some(qmax) = a.qmax {
        let r = nm_sweep(&NmSweep {
            qmax,
            seed,
            subsets: a.trials.unwrap_or(10) as usize,
        })?;
        return sweep("reweighting", r);
    }
    let q = a.q.unwrap_or(4099);
    let (m, k) = (a.m.unwrap_or(1), a.k.unwrap_or(11));
    if m >= 63 || k >= 63 || 1u64 << k > q {
        return Err(bad(format!("need 2^k <= q, got k={k}, q={q}")));
    }
    let variant: NmVariant = a.variant.as_deref().unwrap_or("bit").parse()?;
    let s: Vec<u64> = (0..1u64 << k).collect();
    let t: Vec<u64> = (0..q).collect();
    let map: Vec<u64> = (0..q).map(|y| (y + 1) % q).collect();
    let r = nm_distance(q, 1 << m, &s, &map, &t, variant)?;
    let verdicts = r.pass.map(|p| vec![verdict("distance_bound", p)]).unwrap_or_default();
    Ok((json!(r), verdicts))
}

fn verify_mac(a: &VerifyMacArgs) -> Outcome {
    let params = MacParams::new(a.v.unwrap_or(4), a.d.unwrap_or(8))?;
    let forge = mac_max_forgery(params)?;
    let bound = params.bound();
    Ok((
        json!({"params": params, "max_forgery": forge.to_string(), "bound": bound.to_string()}),
        vec![verdict("forgery_bound", forge <= bound)],
    ))
}
