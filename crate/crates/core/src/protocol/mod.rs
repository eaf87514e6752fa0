//! Parameter derivation, messages, and the Alice/Bob state machines of the
//! two-round and the `(2C+1)`-round privacy amplification protocols.

mod message;
mod params;
mod party;

pub use message::{decode_message, encode_message, Direction, Flavor, Message, Payload, Shape, WireError, WireLayout};
pub use params::{ceil_log2, derive_params, ProtocolParams, S_SLACK};
pub use party::{Alice, Bob, RejectReason, Role, Setup, Status, MAX_RUN_N};

use thiserror::Error;

use crate::condense::CondenseError;
use crate::extract::{BitsError, ExtractError};
use crate::ff::FfError;
use crate::mac::MacError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("bad argument: {0}")]
    BadArgument(String),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("parameters cannot be run: {0}")]
    Unrunnable(String),
    #[error("secret has {got} bits, expected {expected}")]
    SecretLength { got: u32, expected: u32 },
    #[error("operation needs the multi-phase flavor")]
    WrongFlavor,
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error(transparent)]
    Condense(#[from] CondenseError),
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error(transparent)]
    Field(#[from] FfError),
}
