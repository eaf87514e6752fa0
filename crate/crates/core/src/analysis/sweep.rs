use rand::seq::{index::sample, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::ff::is_prime;

use super::charsum::{charsum_theta, theta_quadratic, weil_check, CharSpec, Characters, Poly};
use super::dist::JointTable;
use super::fourier::{l1_fourier_norm_check, residue_map_distance, xor_lemma_check};
use super::nm::{nm_distance, reweight_check, NmVariant};
use super::{AnalysisError, TOL};

/// Environment variable capping sweep concurrency.
pub const WORKERS_ENV: &str = "NMEXT_LAB_WORKERS";

/// Worker cap from [`WORKERS_ENV`]; `None` leaves rayon's default.
pub fn worker_cap() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Order-preserving parallel map under the worker cap.
pub fn par_map<I, O, F>(items: Vec<I>, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    let run = || items.into_par_iter().map(&f).collect();
    match worker_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(run),
        None => run(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub config: Json,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub name: String,
    pub cells: Vec<Cell>,
    pub violations: usize,
    pub pass: bool,
}

impl SweepReport {
    pub fn new(name: &str, cells: Vec<Cell>) -> Self {
        let violations = cells.iter().filter(|c| !c.pass).count();
        SweepReport {
            name: name.to_string(),
            pass: violations == 0,
            violations,
            cells,
        }
    }

    pub fn worst_margin(&self) -> f64 {
        self.cells.iter().map(|c| c.bound - c.value).fold(f64::INFINITY, f64::min)
    }
}

pub fn odd_primes_up_to(qmax: u64) -> Vec<u64> {
    (3..=qmax).filter(|&q| is_prime(q)).collect()
}

fn cell_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn random_subset(q: u64, size: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut v: Vec<u64> = sample(rng, q as usize, size.min(q as usize)).into_iter().map(|x| x as u64).collect();
    v.sort_unstable();
    v
}

/// Uniformly random map without fixed points, as a permutation.
pub fn random_derangement(q: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut p: Vec<u64> = (0..q).collect();
    loop {
        p.shuffle(rng);
        if p.iter().enumerate().all(|(i, &v)| i as u64 != v) {
            return p;
        }
    }
}

/// `y+1`, `2y+1` (sent to 0 at its fixed point `q-1`), `y+2`, and
/// `derangements` seeded random fixed-point-free permutations.
pub fn map_family(q: u64, seed: u64, derangements: usize) -> Vec<(String, Vec<u64>)> {
    let mut maps = vec![
        ("y+1".to_string(), (0..q).map(|y| (y + 1) % q).collect()),
        (
            "2y+1".to_string(),
            (0..q).map(|y| if y == q - 1 { 0 } else { (2 * y + 1) % q }).collect(),
        ),
        ("y+2".to_string(), (0..q).map(|y| (y + 2) % q).collect()),
    ];
    let mut rng = cell_rng(seed, q << 8);
    for i in 0..derangements {
        maps.push((format!("perm{i}"), random_derangement(q, &mut rng)));
    }
    maps
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharsumSweep {
    pub qmax: u64,
    pub seed: u64,
    /// Random subsets of size `ceil(q^{3/4})` used as `S` besides `F_q`.
    pub subsets: usize,
    pub derangements: usize,
    /// Seed supports: empty means `T = F_q`; otherwise sizes
    /// `ceil(sqrt q)` and `ceil(q/2)`, this many of each.
    pub weak_subsets: usize,
    pub rs: Vec<u32>,
}

impl CharsumSweep {
    pub fn uniform(qmax: u64, seed: u64) -> Self {
        CharsumSweep {
            qmax,
            seed,
            subsets: 3,
            derangements: 5,
            weak_subsets: 0,
            rs: vec![],
        }
    }

    pub fn weak(qmax: u64, seed: u64, rs: Vec<u32>) -> Self {
        CharsumSweep {
            weak_subsets: 1,
            rs,
            ..Self::uniform(qmax, seed)
        }
    }
}

/// One cell per `(q, A, a, b, S, T)` and bound. Cells at `a = b = (q-1)/2`
/// also compare against the log-free quadratic evaluation.
pub fn charsum_sweep(cfg: &CharsumSweep) -> Result<SweepReport, AnalysisError> {
    let jobs: Vec<u64> = odd_primes_up_to(cfg.qmax);
    let per_q: Vec<Result<Vec<Cell>, AnalysisError>> = par_map(jobs, |q| charsum_cells(cfg, q));
    let mut cells = Vec::new();
    for c in per_q {
        cells.extend(c?);
    }
    let name = if cfg.weak_subsets == 0 { "charsum" } else { "charsum_weak" };
    Ok(SweepReport::new(name, cells))
}

fn charsum_cells(cfg: &CharsumSweep, q: u64) -> Result<Vec<Cell>, AnalysisError> {
    let chars = Characters::new(q)?;
    let all: Vec<u64> = (0..q).collect();
    let mut rng = cell_rng(cfg.seed, q);
    let s_size = (q as f64).powf(0.75).ceil() as usize;
    let mut sources = vec![("F_q".to_string(), all.clone())];
    for i in 0..cfg.subsets {
        sources.push((format!("rand{i}"), random_subset(q, s_size, &mut rng)));
    }
    let mut seeds = Vec::new();
    if cfg.weak_subsets == 0 {
        seeds.push(("F_q".to_string(), all.clone()));
    } else {
        for size in [(q as f64).sqrt().ceil() as usize, q.div_ceil(2) as usize] {
            for i in 0..cfg.weak_subsets {
                seeds.push((format!("rand{size}_{i}"), random_subset(q, size, &mut rng)));
            }
        }
    }
    let h = (q - 1) / 2;
    let mut ab = vec![];
    for a in [1, h] {
        for b in [0, 1, h] {
            if !ab.contains(&(a, b)) {
                ab.push((a, b));
            }
        }
    }
    let mut cells = Vec::new();
    for (map_name, map) in map_family(q, cfg.seed, cfg.derangements) {
        for &(a, b) in &ab {
            let spec = CharSpec::new(q, a, b)?;
            for (s_name, s) in &sources {
                for (t_name, t) in &seeds {
                    let rep = charsum_theta(&spec, &chars, s, t, &map, &cfg.rs)?;
                    let config = json!({"q": q, "A": map_name, "a": a, "b": b, "S": s_name, "S_size": s.len(), "T": t_name, "T_size": t.len()});
                    let with = |extra: Json| {
                        let mut c = config.clone();
                        c.as_object_mut().expect("object").extend(extra.as_object().expect("object").clone());
                        c
                    };
                    if cfg.weak_subsets == 0 {
                        cells.push(Cell {
                            config: with(json!({"bound": "uniform"})),
                            value: rep.theta,
                            bound: rep.uniform_bound,
                            pass: rep.uniform_pass,
                        });
                    }
                    for w in &rep.weak {
                        cells.push(Cell {
                            config: with(json!({"bound": "weak", "r": w.r, "lambda": w.lambda})),
                            value: rep.theta,
                            bound: w.bound,
                            pass: w.pass,
                        });
                        if let Some(c) = &w.corollary {
                            cells.push(Cell {
                                config: with(json!({"bound": "weak_corollary", "r": w.r, "eta": c.eta})),
                                value: rep.theta,
                                bound: c.bound,
                                pass: c.pass,
                            });
                        }
                    }
                    if a == h && b == h {
                        let direct = theta_quadratic(q, s, t, &map)? as f64;
                        cells.push(Cell {
                            config: with(json!({"bound": "quadratic_cross_check"})),
                            value: (rep.theta - direct).abs(),
                            bound: TOL,
                            pass: (rep.theta - direct).abs() <= TOL,
                        });
                    }
                }
            }
        }
    }
    Ok(cells)
}

/// Every monic squarefree polynomial of the given degrees against every
/// nontrivial character power.
pub fn weil_sweep(qs: &[u64], degrees: &[u32]) -> Result<SweepReport, AnalysisError> {
    let jobs: Vec<(u64, u32)> = qs.iter().flat_map(|&q| degrees.iter().map(move |&d| (q, d))).collect();
    let per: Vec<Result<Vec<Cell>, AnalysisError>> = par_map(jobs, |(q, deg)| {
        let chars = Characters::new(q)?;
        let mut cells = Vec::new();
        for idx in 0..q.pow(deg) {
            let mut coeffs: Vec<u64> = (0..deg).map(|i| idx / q.pow(i) % q).collect();
            coeffs.push(1);
            if !super::charsum::is_squarefree(&coeffs, q) {
                continue;
            }
            for a in 1..q - 1 {
                let w = weil_check(&chars, &Poly::Coeffs(coeffs.clone()), a)?;
                cells.push(Cell {
                    config: json!({"q": q, "coeffs": coeffs, "a": a, "order": w.order}),
                    value: w.sum_abs,
                    bound: w.bound,
                    pass: w.pass,
                });
            }
        }
        Ok(cells)
    });
    let mut cells = Vec::new();
    for c in per {
        cells.extend(c?);
    }
    Ok(SweepReport::new("weil", cells))
}

/// All `2 <= M < N <= nmax`.
pub fn residue_sweep(nmax: u64) -> Result<SweepReport, AnalysisError> {
    let mut cells = Vec::new();
    for n in 3..=nmax {
        for m in 2..n {
            let c = residue_map_distance(n, m)?;
            cells.push(Cell {
                config: json!({"N": n, "M": m, "distance": c.distance.exact.as_ref().map(|r| r.to_string())}),
                value: c.distance.value,
                bound: c.bound.value,
                pass: c.pass,
            });
        }
    }
    Ok(SweepReport::new("residue_map", cells))
}

/// Seeded random joint tables on `Z_M^2` with weights in `0..100`.
pub fn xor_sweep(count: usize, m: usize, seed: u64) -> Result<SweepReport, AnalysisError> {
    let mut cells = Vec::new();
    for i in 0..count {
        let mut rng = cell_rng(seed, i as u64);
        let weights: Vec<u64> = loop {
            let w: Vec<u64> = (0..m * m).map(|_| rand::Rng::gen_range(&mut rng, 0..100)).collect();
            if w.iter().any(|&v| v > 0) {
                break w;
            }
        };
        let j = JointTable::from_weights(&[("w", m), ("w2", m)], &weights)?;
        let c = xor_lemma_check(&j)?;
        cells.push(Cell {
            config: json!({"index": i, "M": m, "check": "distance", "alpha": c.alpha}),
            value: c.distance.value,
            bound: c.distance_bound,
            pass: c.distance_pass,
        });
        cells.push(Cell {
            config: json!({"index": i, "M": m, "check": "sup_norm", "alpha": c.alpha}),
            value: c.sup_norm.value,
            bound: c.alpha,
            pass: c.sup_pass,
        });
    }
    Ok(SweepReport::new("xor", cells))
}

/// All `2 <= M <= N <= nmax`, one cell per character.
pub fn l1norm_sweep(nmax: u64, c_max: f64) -> Result<SweepReport, AnalysisError> {
    let jobs: Vec<(u64, u64)> = (2..=nmax).flat_map(|n| (2..=n).map(move |m| (n, m))).collect();
    let per = par_map(jobs, |(n, m)| l1_fourier_norm_check(n, m, c_max));
    let mut cells = Vec::new();
    for c in per {
        let c = c?;
        for x in &c.norms {
            cells.push(Cell {
                config: json!({"N": c.n, "M": c.m, "j": x.j, "c_max": c_max, "ratio": x.ratio}),
                value: x.norm,
                bound: c.bound,
                pass: x.pass,
            });
        }
    }
    Ok(SweepReport::new("l1norm", cells))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmSweep {
    pub qmax: u64,
    pub seed: u64,
    /// Flat weak-seed supports per `q`.
    pub subsets: usize,
}

/// Per odd prime `q`: the bit extractor with `A(y) = y+1`, `X` flat on a
/// seeded set of size `2^{floor(log2 q) - 1}`, first with the uniform seed
/// and then re-weighted onto seeded flat seed sets of the same size.
pub fn nm_sweep(cfg: &NmSweep) -> Result<SweepReport, AnalysisError> {
    let per = par_map(odd_primes_up_to(cfg.qmax), |q| -> Result<Vec<Cell>, AnalysisError> {
        let mut rng = cell_rng(cfg.seed, q);
        let k = (63 - q.leading_zeros()).saturating_sub(1);
        let s = random_subset(q, 1 << k, &mut rng);
        let map: Vec<u64> = (0..q).map(|y| (y + 1) % q).collect();
        let all: Vec<u64> = (0..q).collect();
        let full = nm_distance(q, 2, &s, &map, &all, NmVariant::Bit)?;
        let mut cells = vec![Cell {
            config: json!({"q": q, "k": k, "check": "uniform_seed"}),
            value: full.distance.value,
            bound: full.bound.min(1.0),
            pass: full.pass == Some(true),
        }];
        for i in 0..cfg.subsets {
            let t = random_subset(q, 1 << k, &mut rng);
            let c = reweight_check(&full, &s, &map, &t)?;
            cells.push(Cell {
                config: json!({
                    "q": q, "k": k, "check": "reweight", "index": i, "T_size": t.len(),
                    "equal": c.equal,
                    "reweighted": c.reweighted.exact.as_ref().map(|r| r.to_string()),
                    "direct": c.direct.exact.as_ref().map(|r| r.to_string()),
                }),
                value: c.reweighted.value,
                bound: c.bound.value,
                pass: c.pass,
            });
        }
        Ok(cells)
    });
    let mut cells = Vec::new();
    for c in per {
        cells.extend(c?);
    }
    Ok(SweepReport::new("nm", cells))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_family_is_fixed_point_free() {
        for q in odd_primes_up_to(40) {
            let maps = map_family(q, 9, 5);
            assert_eq!(maps.len(), 8);
            for (_, m) in maps {
                assert!(m.iter().enumerate().all(|(y, &v)| v != y as u64 && v < q));
            }
        }
        assert_eq!(map_family(13, 9, 5), map_family(13, 9, 5));
    }

    #[test]
    fn small_sweeps_pass_and_are_deterministic() {
        let c = CharsumSweep::uniform(19, 1);
        let a = charsum_sweep(&c).unwrap();
        assert!(a.pass && !a.cells.is_empty());
        assert_eq!(a, charsum_sweep(&c).unwrap());
        let w = charsum_sweep(&CharsumSweep::weak(13, 1, vec![1, 2, 3])).unwrap();
        assert!(w.pass, "{}", w.violations);
        assert!(residue_sweep(16).unwrap().pass);
        assert!(xor_sweep(10, 3, 2).unwrap().pass);
        assert!(l1norm_sweep(12, 8.0).unwrap().pass);
        assert!(weil_sweep(&[5, 7], &[2, 3]).unwrap().pass);
        let nm = nm_sweep(&NmSweep { qmax: 23, seed: 3, subsets: 3 }).unwrap();
        assert!(nm.pass);
    }

    #[test]
    fn worst_margin() {
        let r = SweepReport::new(
            "x",
            vec![
                Cell { config: json!({}), value: 1.0, bound: 3.0, pass: true },
                Cell { config: json!({}), value: 2.0, bound: 1.5, pass: false },
            ],
        );
        assert_eq!(r.violations, 1);
        assert_eq!(r.worst_margin(), -0.5);
    }
}
