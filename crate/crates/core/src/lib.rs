//! Non-malleable extraction from character sums, and the privacy
//! amplification protocols built on it.

pub mod condense;
pub mod dlog;
pub mod extract;
pub mod ff;
pub mod mac;
pub mod protocol;
pub mod harness;
pub mod analysis;
