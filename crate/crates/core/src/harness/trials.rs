use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::extract::BitString;
use crate::protocol::Setup;

use super::session::{run_session, SessionOutcome};
use super::strategy::{make_strategy, StrategySpec};
use super::HarnessError;

/// Largest seeded random support kept in memory.
pub const MAX_SUBSET: u64 = 1 << 20;

/// Distribution of the shared secret `X`; all are flat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceModel {
    Uniform,
    /// `start + U[0, size)`.
    Interval { start: u128, size: u128 },
    /// `size` distinct points drawn with `seed`.
    RandomSubset { size: u64, seed: u64 },
    /// Top bits fixed to `high`, the low `free_bits` uniform.
    FixedHighBits { free_bits: u32, high: u128 },
}

/// A [`SourceModel`] bound to a secret length, ready to sample.
#[derive(Debug, Clone)]
pub struct Source {
    n: u32,
    kind: SourceKind,
}

#[derive(Debug, Clone)]
enum SourceKind {
    Uniform,
    Interval { start: u128, size: u128 },
    Points(Vec<u128>),
    High { free_bits: u32, high: u128 },
}

fn fits(value: u128, n: u32) -> bool {
    n >= 128 || value >> n == 0
}

impl SourceModel {
    pub fn build(&self, n: u32) -> Result<Source, HarnessError> {
        let bad = |why: String| Err(HarnessError::Source(why));
        let kind = match *self {
            SourceModel::Uniform => SourceKind::Uniform,
            SourceModel::Interval { start, size } => {
                let end = start.checked_add(size).map(|e| e - 1);
                if size == 0 || end.is_none_or(|e| !fits(e, n)) {
                    return bad(format!("interval [{start}, {start}+{size}) not inside {n} bits"));
                }
                SourceKind::Interval { start, size }
            }
            SourceModel::RandomSubset { size, seed } => {
                if size == 0 || size > MAX_SUBSET || (n < 64 && size > 1u64 << n) {
                    return bad(format!("subset size {size} invalid for {n} bits"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut points = BTreeSet::new();
                while (points.len() as u64) < size {
                    points.insert(BitString::random(n, &mut rng)?.value());
                }
                SourceKind::Points(points.into_iter().collect())
            }
            SourceModel::FixedHighBits { free_bits, high } => {
                if free_bits > n || !fits(high, n - free_bits) {
                    return bad(format!("{free_bits} free bits with high part {high} exceed {n} bits"));
                }
                SourceKind::High { free_bits, high }
            }
        };
        Ok(Source { n, kind })
    }
}

impl Source {
    pub fn n(&self) -> u32 {
        self.n
    }

    /// `log2` of the support size.
    pub fn min_entropy(&self) -> f64 {
        match &self.kind {
            SourceKind::Uniform => self.n as f64,
            SourceKind::Interval { size, .. } => (*size as f64).log2(),
            SourceKind::Points(p) => (p.len() as f64).log2(),
            SourceKind::High { free_bits, .. } => *free_bits as f64,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        let value = match &self.kind {
            SourceKind::Uniform => return BitString::random(self.n, rng).expect("n fits"),
            SourceKind::Interval { start, size } => start + rng.gen_range(0..*size),
            SourceKind::Points(p) => p[rng.gen_range(0..p.len())],
            SourceKind::High { free_bits, high } => {
                let low = BitString::random(*free_bits, rng).expect("fits").value();
                if *free_bits >= 128 {
                    low
                } else {
                    (high << free_bits) | low
                }
            }
        };
        BitString::new(value, self.n).expect("validated at build")
    }
}

/// Aggregate counters over independent sessions. The first five partition `trials`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    pub seed: u64,
    pub both_accept: u64,
    pub alice_only: u64,
    pub bob_only: u64,
    pub neither: u64,
    pub aborted: u64,
    pub alice_accept: u64,
    pub bob_accept: u64,
    pub synchronous: u64,
    pub robustness_broken: u64,
    pub desync_accept: u64,
    pub alice_accepted_modified: u64,
    pub bob_accepted_modified: u64,
}

impl TrialStats {
    fn empty(seed: u64) -> Self {
        TrialStats {
            seed,
            ..Default::default()
        }
    }

    fn of(seed: u64, o: &SessionOutcome) -> Self {
        let mut s = Self::empty(seed);
        s.trials = 1;
        let (a, b) = (o.r_a.is_some(), o.r_b.is_some());
        match (o.aborted.is_some(), a, b) {
            (true, _, _) => s.aborted = 1,
            (false, true, true) => s.both_accept = 1,
            (false, true, false) => s.alice_only = 1,
            (false, false, true) => s.bob_only = 1,
            (false, false, false) => s.neither = 1,
        }
        s.alice_accept = a as u64;
        s.bob_accept = b as u64;
        s.synchronous = o.synchronous as u64;
        s.robustness_broken = o.flags.robustness_broken as u64;
        s.desync_accept = o.flags.desync_accept as u64;
        s.alice_accepted_modified = o.flags.alice_accepted_modified as u64;
        s.bob_accepted_modified = o.flags.bob_accepted_modified as u64;
        s
    }

    fn merge(self, o: Self) -> Self {
        TrialStats {
            trials: self.trials + o.trials,
            seed: self.seed,
            both_accept: self.both_accept + o.both_accept,
            alice_only: self.alice_only + o.alice_only,
            bob_only: self.bob_only + o.bob_only,
            neither: self.neither + o.neither,
            aborted: self.aborted + o.aborted,
            alice_accept: self.alice_accept + o.alice_accept,
            bob_accept: self.bob_accept + o.bob_accept,
            synchronous: self.synchronous + o.synchronous,
            robustness_broken: self.robustness_broken + o.robustness_broken,
            desync_accept: self.desync_accept + o.desync_accept,
            alice_accepted_modified: self.alice_accepted_modified + o.alice_accepted_modified,
            bob_accepted_modified: self.bob_accepted_modified + o.bob_accepted_modified,
        }
    }

    pub fn frequency(&self, count: u64) -> f64 {
        count as f64 / self.trials as f64
    }

    pub fn frequency_exact(&self, count: u64) -> BigRational {
        BigRational::new(BigInt::from(count), BigInt::from(self.trials))
    }
}

/// `count/trials <= bound + 3 sigma`, with sigma the binomial deviation at `bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub count: u64,
    pub trials: u64,
    pub frequency: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

pub fn check_frequency(count: u64, trials: u64, bound: f64) -> BoundCheck {
    let p = bound.clamp(0.0, 1.0);
    let margin = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
    let frequency = count as f64 / trials as f64;
    BoundCheck {
        count,
        trials,
        frequency,
        bound,
        margin,
        pass: frequency <= bound + margin,
    }
}

/// The secret and session tape of trial `index`; depends only on `(seed, index)`.
fn trial_inputs(source: &Source, seed: u64, index: u64) -> (BitString, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let x = source.sample(&mut rng);
    (x, rng.gen())
}

/// One session of the experiment, reproducible from `(seed, index)`.
pub fn run_trial(
    setup: &Arc<Setup>,
    source: &Source,
    spec: &StrategySpec,
    seed: u64,
    index: u64,
    post_application: bool,
) -> Result<SessionOutcome, HarnessError> {
    let (x, tape) = trial_inputs(source, seed, index);
    let mut strategy = make_strategy(&spec.name, &spec.cfg)?;
    run_session(setup, &x, strategy.as_mut(), post_application, tape)
}

pub fn run_trials(
    setup: &Arc<Setup>,
    source: &SourceModel,
    spec: &StrategySpec,
    trials: u64,
    seed: u64,
    post_application: bool,
) -> Result<TrialStats, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::BadArgument("trials must be at least 1".into()));
    }
    make_strategy(&spec.name, &spec.cfg)?;
    let source = source.build(setup.params().n)?;
    (0..trials)
        .into_par_iter()
        .map(|i| run_trial(setup, &source, spec, seed, i, post_application).map(|o| TrialStats::of(seed, &o)))
        .try_reduce(|| TrialStats::empty(seed), |a, b| Ok(a.merge(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionEstimate {
    pub bit_budget: u32,
    pub trials: u64,
    pub accepts: u64,
    /// Distance of the accepted-key prefix histogram from uniform.
    pub distance: f64,
    /// Distance between the accepted histogram and an equal-size sample of
    /// uniformly resampled keys.
    pub purified_distance: f64,
    /// Sampling-noise allowance for `distance`.
    pub margin: f64,
    pub pass: bool,
}

/// Accepted keys needed per histogram cell.
pub const MIN_ACCEPTS_PER_CELL: u64 = 10;

fn tv_from_uniform(hist: &[u64], total: u64) -> f64 {
    let u = 1.0 / hist.len() as f64;
    0.5 * hist.iter().map(|&c| (c as f64 / total as f64 - u).abs()).sum::<f64>()
}

/// Monte-Carlo estimate of how far Alice's accepted key prefix is from uniform.
pub fn estimate_extraction(
    setup: &Arc<Setup>,
    source: &SourceModel,
    spec: &StrategySpec,
    trials: u64,
    seed: u64,
    bit_budget: u32,
) -> Result<ExtractionEstimate, HarnessError> {
    if bit_budget > 8 || bit_budget > setup.params().m_out {
        return Err(HarnessError::BadArgument(format!(
            "bit budget {bit_budget} exceeds min(8, m_out={})",
            setup.params().m_out
        )));
    }
    if bit_budget == 0 {
        return Ok(ExtractionEstimate {
            bit_budget,
            trials,
            accepts: 0,
            distance: 0.0,
            purified_distance: 0.0,
            margin: 0.0,
            pass: true,
        });
    }
    make_strategy(&spec.name, &spec.cfg)?;
    let built = source.build(setup.params().n)?;
    let cells = 1usize << bit_budget;
    let hist = (0..trials)
        .into_par_iter()
        .map(|i| {
            let o = run_trial(setup, &built, spec, seed, i, false)?;
            let mut h = vec![0u64; cells];
            if let Some(k) = o.r_a {
                h[k.slice(1, bit_budget)?.value() as usize] += 1;
            }
            Ok::<_, HarnessError>(h)
        })
        .try_reduce(
            || vec![0u64; cells],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let accepts: u64 = hist.iter().sum();
    let needed = MIN_ACCEPTS_PER_CELL * cells as u64;
    if accepts < needed {
        return Err(HarnessError::InsufficientAccepts { accepts, needed });
    }
    let mut purify = ChaCha8Rng::seed_from_u64(seed ^ 0x7075_7269_6679);
    let mut resampled = vec![0u64; cells];
    for _ in 0..accepts {
        resampled[purify.gen_range(0..cells)] += 1;
    }
    let purified_distance = 0.5
        * hist
            .iter()
            .zip(&resampled)
            .map(|(&a, &b)| (a as f64 - b as f64).abs() / accepts as f64)
            .sum::<f64>();
    let u = 1.0 / cells as f64;
    let margin = 1.5 * cells as f64 * (u * (1.0 - u) / accepts as f64).sqrt();
    let distance = tv_from_uniform(&hist, accepts);
    Ok(ExtractionEstimate {
        bit_budget,
        trials,
        accepts,
        distance,
        purified_distance,
        margin,
        pass: distance <= margin,
    })
}
