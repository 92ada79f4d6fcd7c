//! Semi-honest two-party evaluation of [`BooleanCircuit`]s.
//!
//! Two interchangeable backends share one channel/session layer:
//!
//! * [`gmw`]: XOR secret sharing with Beaver triples; one round per AND layer.
//! * [`yao`]: garbled circuits with free-XOR and point-and-permute; a
//!   constant number of online rounds.
//!
//! Both return XOR shares of the outputs; [`runner::open_outputs`]
//! reconstructs them. Correlated randomness comes from a trusted
//! [`dealer::Dealer`] in place of oblivious transfer.
//!
//! [`BooleanCircuit`]: crate::circuits::BooleanCircuit

pub mod channel;
pub mod dealer;
pub mod frame;
pub mod gmw;
pub mod runner;
pub mod session;
pub mod sharing;
pub mod yao;

use std::io;

use thiserror::Error;

use crate::circuits::CircuitError;
use frame::FrameError;

/// A 128-bit garbled-circuit wire label.
pub type Label = u128;

#[derive(Debug, Error)]
pub enum SmpcError {
    #[error("setup under-provisioned: needed {needed} triples, {available} available")]
    TripleExhausted { needed: usize, available: usize },
    #[error("session aborted: {0}")]
    SessionAborted(String),
    #[error("garbled table integrity check failed at gate {gate}")]
    LabelIntegrity { gate: usize },
    #[error("share length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub use channel::{Channel, LocalChannel, TcpChannel};
pub use dealer::{dealer_gen, Dealer, MaterialNeeds, SetupMaterial};
pub use frame::{Frame, FrameKind};
pub use gmw::gmw_execute;
pub use runner::{execute, online_rounds, open, open_outputs, run_pair, Backend, PairOptions, PairRun, Reveal, GARBLER};
pub use session::{Direction, Phase, Session, SessionTranscript};
pub use sharing::{reconstruct, share, BitShares};
pub use yao::yao_execute;
