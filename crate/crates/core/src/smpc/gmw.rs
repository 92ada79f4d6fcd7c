//! GMW evaluation over XOR shares.
//!
//! Setup: each party sends a random nonce for every one of its input bits and
//! keeps `input XOR nonce` as its own share, so no input-dependent message is
//! needed before the first AND layer. Online: all AND gates of one
//! multiplicative level are opened together with Beaver triples in a single
//! exchange; XOR and NOT gates are local.

use rand::Rng;

use super::channel::Channel;
use super::dealer::TripleSource;
use super::frame::FrameKind;
use super::session::Session;
use super::sharing::BitShares;
use super::SmpcError;
use crate::bits::Bits;
use crate::circuits::{BooleanCircuit, CircuitError, Gate, Party};

/// Gates grouped by multiplicative level. Level 0 holds only linear gates.
pub struct Schedule {
    pub and_levels: Vec<Vec<usize>>,
    pub linear_levels: Vec<Vec<usize>>,
}

impl Schedule {
    pub fn new(c: &BooleanCircuit) -> Self {
        let levels = c.wire_levels();
        let depth = levels.iter().copied().max().unwrap_or(0) as usize;
        let mut and_levels = vec![Vec::new(); depth + 1];
        let mut linear_levels = vec![Vec::new(); depth + 1];
        for (i, g) in c.gates().iter().enumerate() {
            let l = levels[g.output().index()] as usize;
            match g {
                Gate::And { .. } => and_levels[l].push(i),
                _ => linear_levels[l].push(i),
            }
        }
        Schedule { and_levels, linear_levels }
    }

    pub fn depth(&self) -> usize {
        self.and_levels.len() - 1
    }
}

fn check_input(c: &BooleanCircuit, me: Party, input: &Bits) -> Result<(), SmpcError> {
    let expected = c.input_len(me);
    if input.len() != expected {
        return Err(CircuitError::MissingInput { party: me, expected, got: input.len() }.into());
    }
    Ok(())
}

fn bits_payload(bits: &Bits) -> Vec<u8> {
    bits.to_bytes()
}

fn payload_bits(payload: &[u8], len: usize) -> Result<Bits, SmpcError> {
    if payload.len() != len.div_ceil(8) {
        return Err(SmpcError::Protocol(format!("expected {} payload bytes, got {}", len.div_ceil(8), payload.len())));
    }
    Ok(Bits::from_bytes(payload, len).expect("length checked"))
}

/// Runs GMW for party `me`, returning this party's shares of the outputs.
pub fn gmw_execute<C: Channel, R: Rng + ?Sized>(
    circuit: &BooleanCircuit,
    me: Party,
    my_input: &Bits,
    session: &mut Session<C>,
    triples: &mut TripleSource,
    rng: &mut R,
) -> Result<BitShares, SmpcError> {
    check_input(circuit, me, my_input)?;
    let and_count = circuit.and_count();
    if triples.remaining() < and_count {
        return Err(SmpcError::TripleExhausted { needed: and_count, available: triples.remaining() });
    }
    let schedule = Schedule::new(circuit);
    let mut v = vec![false; circuit.n_wires()];

    session.next_round();
    let nonce = Bits::random(my_input.len(), rng);
    session.send(FrameKind::InputShare, bits_payload(&nonce))?;
    let peer_len = circuit.input_len(me.other());
    let peer_nonce = payload_bits(&session.recv(FrameKind::InputShare)?, peer_len)?;
    let mine = my_input.xor(&nonce);
    for (w, b) in circuit.input_wires(me).into_iter().zip(mine.iter()) {
        v[w.index()] = b;
    }
    for (w, b) in circuit.input_wires(me.other()).into_iter().zip(peer_nonce.iter()) {
        v[w.index()] = b;
    }

    session.begin_online();
    let gates = circuit.gates();
    let flip = me == Party::A;
    let linear = |v: &mut Vec<bool>, idx: &[usize]| {
        for &i in idx {
            match gates[i] {
                Gate::Xor { a, b, out } => v[out.index()] = v[a.index()] ^ v[b.index()],
                Gate::Not { a, out } => v[out.index()] = v[a.index()] ^ flip,
                Gate::And { .. } => unreachable!("AND gate in linear schedule"),
            }
        }
    };
    linear(&mut v, &schedule.linear_levels[0]);
    for level in 1..=schedule.depth() {
        let ands = &schedule.and_levels[level];
        let base = triples.take(ands.len())?;
        let mut opening = Bits::zeros(0);
        for (j, &i) in ands.iter().enumerate() {
            let Gate::And { a, b, .. } = gates[i] else { unreachable!() };
            let (ta, tb, _) = triples.get(base + j);
            opening.push(v[a.index()] ^ ta);
            opening.push(v[b.index()] ^ tb);
        }
        session.next_round();
        session.send(FrameKind::AndOpening, bits_payload(&opening))?;
        let peer = payload_bits(&session.recv(FrameKind::AndOpening)?, opening.len())?;
        for (j, &i) in ands.iter().enumerate() {
            let Gate::And { out, .. } = gates[i] else { unreachable!() };
            let (ta, tb, tc) = triples.get(base + j);
            let d = opening.get(2 * j) ^ peer.get(2 * j);
            let e = opening.get(2 * j + 1) ^ peer.get(2 * j + 1);
            v[out.index()] = tc ^ (d & tb) ^ (e & ta) ^ (flip & d & e);
        }
        linear(&mut v, &schedule.linear_levels[level]);
    }
    Ok(BitShares(Bits::from_bools(circuit.outputs().iter().map(|w| v[w.index()]))))
}
