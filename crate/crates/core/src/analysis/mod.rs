//! Exact verification on small instances: distributions and entropies,
//! Fourier and XOR-lemma checks, character sums, and non-malleability
//! distances.

mod charsum;
mod dist;
mod fourier;
mod nm;
mod sweep;

pub use charsum::{
    charsum_theta, default_r, is_squarefree, lambda_r, theta_quadratic, weil_check, CharSpec, Characters,
    CharsumReport, Corollary, Poly, WeakBound, WeilCheck, ZeroConvention,
};
pub use dist::{
    avg_cond_min_entropy, entropy_spread_check, leakage_chain_check, min_entropy, stat_distance, CondEntropy,
    Distribution, JointTable, LeakageCheck, SpreadCheck, Value,
};
pub use fourier::{
    fourier_alpha, general_xor_ratio, l1_fourier_norm_check, residue_map_distance, xor_lemma_check,
    GeneralXorRatio, L1Check, L1Norm, ResidueCheck, XorCheck, MAX_L1_N,
};
pub use nm::{nm_distance, output_table, reweight_check, NmReport, NmVariant, ReweightCheck, MAX_NM_M};
pub use sweep::{
    charsum_sweep, l1norm_sweep, map_family, nm_sweep, odd_primes_up_to, par_map, random_derangement,
    random_subset, residue_sweep, weil_sweep, worker_cap, xor_sweep, Cell, CharsumSweep, NmSweep, SweepReport,
    WORKERS_ENV,
};

use thiserror::Error;

/// Absolute slack on floating comparisons.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("empty support")]
    Empty,
    #[error("support sizes differ: {0} vs {1}")]
    SupportMismatch(usize, usize),
    #[error("not a distribution: {0}")]
    InvalidDistribution(String),
    #[error("unknown or repeated axis {0:?}")]
    Axis(String),
    #[error("bad shape: {0}")]
    Shape(String),
    #[error("bad field: {0}")]
    Field(String),
    #[error("bad exponent: {0}")]
    Exponent(String),
    #[error("map fixes y={0}")]
    FixedPoint(u64),
    #[error("bad polynomial: {0}")]
    Poly(String),
}
