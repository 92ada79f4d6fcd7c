//! Backend selection, output reconstruction, and an in-process two-party
//! driver.

use std::fmt;
use std::str::FromStr;
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::channel::{Channel, LocalChannel};
use super::dealer::{Dealer, MaterialNeeds, TripleSource};
use super::frame::FrameKind;
use super::session::{Session, SessionTranscript};
use super::sharing::{reconstruct, BitShares};
use super::{gmw, yao, SmpcError};
use crate::bits::Bits;
use crate::circuits::{BooleanCircuit, Party};

/// The party that garbles under [`Backend::Yao`]. In Distinct-Match this is
/// the rule holder.
pub const GARBLER: Party = Party::B;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Backend {
    Gmw,
    Yao,
}

impl Backend {
    pub const ALL: [Backend; 2] = [Backend::Gmw, Backend::Yao];

    pub fn tag(self) -> u8 {
        match self {
            Backend::Gmw => 1,
            Backend::Yao => 2,
        }
    }

    pub fn from_tag(t: u8) -> Option<Backend> {
        Backend::ALL.into_iter().find(|b| b.tag() == t)
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Gmw => "gmw",
            Backend::Yao => "yao",
        })
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gmw" => Ok(Backend::Gmw),
            "yao" => Ok(Backend::Yao),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

pub fn material_needs(circuit: &BooleanCircuit, backend: Backend) -> MaterialNeeds {
    match backend {
        Backend::Gmw => MaterialNeeds { triples: circuit.and_count(), label_transfers: 0 },
        Backend::Yao => MaterialNeeds { triples: 0, label_transfers: circuit.input_len(GARBLER.other()) },
    }
}

/// Fetches this party's setup material from the dealer and runs the chosen
/// backend, returning output shares.
#[allow(clippy::too_many_arguments)]
pub fn execute<C: Channel, R: Rng + ?Sized>(
    backend: Backend,
    circuit: &BooleanCircuit,
    me: Party,
    my_input: &Bits,
    session: &mut Session<C>,
    dealer: &Dealer,
    nonce: u64,
    rng: &mut R,
) -> Result<BitShares, SmpcError> {
    let needs = material_needs(circuit, backend);
    let material = dealer.material(nonce, me, needs, GARBLER);
    session.record_dealer(FrameKind::SetupTriples, &material.to_bytes());
    match backend {
        Backend::Gmw => {
            let mut triples = TripleSource::new(material.triples);
            gmw::gmw_execute(circuit, me, my_input, session, &mut triples, rng)
        }
        Backend::Yao => yao::yao_execute(circuit, me, GARBLER, my_input, session, &material, rng),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reveal {
    Both,
    To(Party),
}

/// Reconstructs shared outputs in one round. Returns the value if this party
/// is a recipient.
pub fn open<C: Channel>(
    session: &mut Session<C>,
    me: Party,
    share: &BitShares,
    reveal: Reveal,
) -> Result<Option<Bits>, SmpcError> {
    session.next_round();
    let send = match reveal {
        Reveal::Both => true,
        Reveal::To(p) => p != me,
    };
    let receive = match reveal {
        Reveal::Both => true,
        Reveal::To(p) => p == me,
    };
    if send {
        session.send(FrameKind::OutputShare, share.bits().to_bytes())?;
    }
    if receive {
        return Ok(Some(recv_share(session, share)?));
    }
    Ok(None)
}

/// Reconstructs the outputs of [`execute`] with the backend's natural
/// message pattern.
///
/// Under GMW every share depends on the last AND layer, so reconstruction
/// is one extra round. Under Yao the garbler's shares are fixed at garbling
/// time and ride in the same flight as its input labels; only a reveal to
/// the garbler costs an extra round.
pub fn open_outputs<C: Channel>(
    backend: Backend,
    session: &mut Session<C>,
    me: Party,
    share: &BitShares,
    reveal: Reveal,
) -> Result<Option<Bits>, SmpcError> {
    if backend == Backend::Gmw {
        return open(session, me, share, reveal);
    }
    let evaluator = GARBLER.other();
    let to_evaluator = reveal != Reveal::To(GARBLER);
    let to_garbler = reveal != Reveal::To(evaluator);
    let mut out = None;
    if to_evaluator {
        if me == GARBLER {
            session.send(FrameKind::OutputShare, share.bits().to_bytes())?;
        } else {
            out = Some(recv_share(session, share)?);
        }
    }
    if to_garbler {
        session.next_round();
        if me == evaluator {
            session.send(FrameKind::OutputShare, share.bits().to_bytes())?;
        } else {
            out = Some(recv_share(session, share)?);
        }
    }
    Ok(out)
}

fn recv_share<C: Channel>(session: &mut Session<C>, share: &BitShares) -> Result<Bits, SmpcError> {
    let payload = session.recv(FrameKind::OutputShare)?;
    let theirs = Bits::from_bytes(&payload, share.len())
        .filter(|_| payload.len() == share.len().div_ceil(8))
        .ok_or_else(|| SmpcError::LengthMismatch { left: share.len(), right: payload.len() * 8 })?;
    reconstruct(share, &BitShares(theirs))
}

/// Online rounds of [`execute`] followed by [`open_outputs`].
pub fn online_rounds(backend: Backend, and_depth: usize, reveal: Reveal) -> u32 {
    match backend {
        Backend::Gmw => and_depth as u32 + 1,
        Backend::Yao => yao::ONLINE_ROUNDS + u32::from(reveal != Reveal::To(GARBLER.other())),
    }
}

#[derive(Clone, Debug)]
pub struct PairOptions {
    pub backend: Backend,
    pub delay: Duration,
    pub dealer_seed: u64,
    pub nonce: u64,
    pub seed_a: u64,
    pub seed_b: u64,
    pub capture: bool,
    pub reveal: Reveal,
}

impl PairOptions {
    pub fn new(backend: Backend) -> Self {
        PairOptions {
            backend,
            delay: Duration::ZERO,
            dealer_seed: 0,
            nonce: 0,
            seed_a: 1,
            seed_b: 2,
            capture: false,
            reveal: Reveal::Both,
        }
    }
}

#[derive(Debug)]
pub struct PairRun {
    /// The reconstructed output, as learned by the recipient(s).
    pub output: Bits,
    pub share_a: BitShares,
    pub share_b: BitShares,
    pub transcript_a: SessionTranscript,
    pub transcript_b: SessionTranscript,
}

fn run_party(
    circuit: &BooleanCircuit,
    me: Party,
    input: &Bits,
    channel: LocalChannel,
    opts: &PairOptions,
) -> Result<(Option<Bits>, BitShares, SessionTranscript), SmpcError> {
    let seed = if me == Party::A { opts.seed_a } else { opts.seed_b };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut session = Session::with_capture(channel, opts.capture);
    let dealer = Dealer::new(opts.dealer_seed);
    let share = execute(opts.backend, circuit, me, input, &mut session, &dealer, opts.nonce, &mut rng)?;
    let out = open_outputs(opts.backend, &mut session, me, &share, opts.reveal)?;
    session.finish();
    Ok((out, share, session.into_parts().1))
}

/// Runs both parties on threads over a [`LocalChannel`] and reveals the
/// output as configured in `opts`.
pub fn run_pair(circuit: &BooleanCircuit, a_input: &Bits, b_input: &Bits, opts: &PairOptions) -> Result<PairRun, SmpcError> {
    let (ca, cb) = LocalChannel::pair(opts.delay);
    let (ra, rb) = thread::scope(|s| {
        let hb = s.spawn(|| run_party(circuit, Party::B, b_input, cb, opts));
        let ra = run_party(circuit, Party::A, a_input, ca, opts);
        (ra, hb.join().expect("party B panicked"))
    });
    let (out_a, share_a, transcript_a) = ra?;
    let (out_b, share_b, transcript_b) = rb?;
    let output = match (out_a, out_b) {
        (Some(a), Some(b)) if a != b => {
            return Err(SmpcError::Protocol("parties reconstructed different outputs".into()));
        }
        (Some(x), _) | (None, Some(x)) => x,
        (None, None) => return Err(SmpcError::Protocol("nobody learned the output".into())),
    };
    Ok(PairRun { output, share_a, share_b, transcript_a, transcript_b })
}
