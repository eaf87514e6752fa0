use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use nmext_core::harness::{SourceModel, StrategyCfg};

#[derive(Debug, Parser)]
#[command(name = "nmext-lab", version, about = "Experiments and exact verifiers for a character-sum non-malleable extractor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON object whose keys fill any flag not given on the command line.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize)]
#[serde(tag = "name", content = "args", rename_all = "kebab-case")]
pub enum Command {
    /// Least prime q = 1 (mod 2^m).
    Findprime(FindPrimeArgs),
    /// One evaluation of log_g(x+y) mod 2^m.
    Nmext(NmextArgs),
    /// Discrete logarithm, by Pohlig-Hellman and by linear scan.
    Dlog(DlogArgs),
    /// One-time MAC tag.
    Mac(MacArgs),
    /// Protocol experiments.
    #[command(subcommand)]
    Protocol(ProtocolCmd),
    /// Exact verification sweeps.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Derived protocol parameters.
    Params(ParamsArgs),
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize)]
#[serde(tag = "name", content = "args", rename_all = "kebab-case")]
pub enum ProtocolCmd {
    /// Monte-Carlo trials against one Eve strategy.
    Run(ProtocolArgs),
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize)]
#[serde(tag = "name", content = "args", rename_all = "kebab-case")]
pub enum VerifyCmd {
    /// Character-sum bounds over all odd primes up to --qmax.
    Charsum(CharsumArgs),
    /// Weil bound on monic squarefree quadratics and cubics.
    Weil(WeilArgs),
    /// Exact non-malleability distance, or the re-weighting sweep with --qmax.
    Nm(NmArgs),
    /// XOR lemma on seeded random joint tables.
    Xor(XorArgs),
    /// Distance of U_N mod M from uniform, for all 2 <= M < N <= --nmax.
    #[command(name = "residue-map")]
    ResidueMap(ResidueArgs),
    /// l1 Fourier norms of characters composed with x mod M.
    L1norm(L1Args),
    /// Exact MAC forgery probability.
    Mac(VerifyMacArgs),
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FindPrimeArgs {
    #[arg(long)]
    pub m: Option<u32>,
    /// Search strictly above this value.
    #[arg(long)]
    pub above: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmextArgs {
    #[arg(long)]
    pub q: Option<u64>,
    /// Generator; the field's smallest generator when unset.
    #[arg(long)]
    pub g: Option<u64>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub x: Option<u64>,
    #[arg(long)]
    pub y: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DlogArgs {
    #[arg(long)]
    pub q: Option<u64>,
    #[arg(long)]
    pub g: Option<u64>,
    /// The element whose logarithm is taken.
    #[arg(long)]
    pub x: Option<u64>,
    /// Also reduce modulo 2^m by Pohlig-Hellman.
    #[arg(long)]
    pub m: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacArgs {
    /// Field degree.
    #[arg(long)]
    pub v: Option<u32>,
    /// Message length in bits.
    #[arg(long)]
    pub d: Option<u32>,
    /// Key as `len:hex`, `2v` bits.
    #[arg(long)]
    pub key: Option<String>,
    /// Message as `len:hex`, `d` bits.
    #[arg(long)]
    pub msg: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolArgs {
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `two_round` or `multi_phase`.
    #[arg(long)]
    pub flavor: Option<String>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub t_cond: Option<u32>,
    /// Clamp the output length instead of failing when entropy runs out
    /// (the default here).
    #[arg(long, conflicts_with = "checked", default_missing_value = "true", num_args = 0)]
    pub unchecked: Option<bool>,
    /// Fail when the entropy accounting does not close.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checked: Option<bool>,
    /// Hide a key from Eve until its owner stops.
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub post_application: Option<bool>,
    /// Write trial 0's transcript here as JSON lines.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(skip)]
    pub strategy_cfg: Option<StrategyCfg>,
    #[arg(skip)]
    pub source: Option<SourceModel>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsArgs {
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub t_cond: Option<u32>,
    #[arg(long, num_args = 0, default_missing_value = "true")]
    pub unchecked: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharsumArgs {
    #[arg(long)]
    pub qmax: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weak-seed exponents; adds the weak-seed sweep.
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeilArgs {
    #[arg(long, conflicts_with = "qmax")]
    pub q: Option<u64>,
    /// All odd primes from 5 up to this bound.
    #[arg(long)]
    pub qmax: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmArgs {
    /// Field size; the least prime above 4096 when unset.
    #[arg(long, conflicts_with = "qmax")]
    pub q: Option<u64>,
    /// Run the re-weighting sweep over all odd primes up to this bound.
    #[arg(long)]
    pub qmax: Option<u64>,
    /// Output length in bits: M = 2^m.
    #[arg(long)]
    pub m: Option<u32>,
    /// Source size: X flat on {0, ..., 2^k - 1}.
    #[arg(long)]
    pub k: Option<u32>,
    /// `bit`, `dlog` or `general_m`.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weak-seed sets per prime in the sweep.
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XorArgs {
    /// Number of random tables.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Group order.
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidueArgs {
    #[arg(long)]
    pub nmax: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L1Args {
    #[arg(long)]
    pub nmax: Option<u64>,
    #[arg(long)]
    pub c_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyMacArgs {
    #[arg(long)]
    pub v: Option<u32>,
    #[arg(long)]
    pub d: Option<u32>,
}
