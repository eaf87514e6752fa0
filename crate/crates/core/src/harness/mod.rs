//! Active-adversary session driver, built-in Eve strategies and Monte-Carlo
//! experiments over the protocols.

mod session;
mod strategy;
mod trials;

pub use session::{
    flags_from_transcript, is_synchronous, run_session, synchronous_order, AbortReason, Call, CallRecord, EveStrategy,
    EveView, Flags, GateRecord, SessionOutcome, Verdict,
};
pub use strategy::{make_strategy, StrategyCfg, StrategySpec, STRATEGY_NAMES};
pub use trials::{
    check_frequency, estimate_extraction, run_trial, run_trials, BoundCheck, ExtractionEstimate, Source, SourceModel,
    TrialStats, MAX_SUBSET, MIN_ACCEPTS_PER_CELL,
};

use thiserror::Error;

use crate::extract::BitsError;
use crate::protocol::ProtocolError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    #[error("unknown strategy {0:?}")]
    UnknownStrategy(String),
    #[error("bad strategy config: {0}")]
    StrategyConfig(String),
    #[error("bad source: {0}")]
    Source(String),
    #[error("bad argument: {0}")]
    BadArgument(String),
    #[error("only {accepts} accepted keys, need {needed}")]
    InsufficientAccepts { accepts: u64, needed: u64 },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Bits(#[from] BitsError),
}

#[cfg(test)]
mod tests;
