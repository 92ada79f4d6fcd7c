//! Garbled-circuit evaluation with free-XOR and point-and-permute.
//!
//! The garbler picks a global offset `delta` with its low bit set, so the
//! two labels of a wire, `L0` and `L0 ^ delta`, always differ in their low
//! ("permute") bit. XOR and NOT gates need no table. Each AND gate has four
//! rows of 20 bytes, indexed by the permute bits of its input labels; a row
//! is the output label followed by a zero tag, masked with a hash of the two
//! input labels and the gate index.
//!
//! Tables are input-independent and travel in the setup phase. Online, the
//! evaluator's input labels are fetched with precomputed label transfers
//! (two flights) and then the circuit is evaluated locally. Outputs stay
//! shared: the evaluator's share is the permute bit of its output label and
//! the garbler's share is the permute bit of `L0`.

use rand::Rng;
use sha2::{Digest, Sha256};

use super::channel::Channel;
use super::dealer::SetupMaterial;
use super::frame::{FrameKind, PayloadReader};
use super::session::Session;
use super::sharing::BitShares;
use super::{Label, SmpcError};
use crate::bits::Bits;
use crate::circuits::{BooleanCircuit, CircuitError, Gate, Party};

pub const ROW_BYTES: usize = 20;
pub const TABLE_BYTES: usize = 4 * ROW_BYTES;

/// Online rounds of [`yao_execute`]: label-transfer corrections, then the
/// garbler's labels. A reveal to the evaluator rides in the second flight.
pub const ONLINE_ROUNDS: u32 = 2;

#[inline]
fn lsb(l: Label) -> usize {
    (l & 1) as usize
}

fn row_pad(a: Label, b: Label, gate: u64) -> [u8; ROW_BYTES] {
    let mut h = Sha256::new();
    h.update(a.to_be_bytes());
    h.update(b.to_be_bytes());
    h.update(gate.to_be_bytes());
    let d = h.finalize();
    d[..ROW_BYTES].try_into().unwrap()
}

fn seal(pad: [u8; ROW_BYTES], label: Label) -> [u8; ROW_BYTES] {
    let mut row = [0u8; ROW_BYTES];
    row[..16].copy_from_slice(&label.to_be_bytes());
    for (r, p) in row.iter_mut().zip(pad) {
        *r ^= p;
    }
    row
}

fn open_row(pad: [u8; ROW_BYTES], row: &[u8]) -> Option<Label> {
    let mut plain = [0u8; ROW_BYTES];
    for i in 0..ROW_BYTES {
        plain[i] = row[i] ^ pad[i];
    }
    if plain[16..] != [0u8; 4] {
        return None;
    }
    Some(Label::from_be_bytes(plain[..16].try_into().unwrap()))
}

/// Garbler-side state: zero labels of every wire and the offset.
pub struct Garbling {
    pub delta: Label,
    pub zero: Vec<Label>,
    pub tables: Vec<u8>,
}

pub fn garble<R: Rng + ?Sized>(c: &BooleanCircuit, rng: &mut R) -> Garbling {
    let delta: Label = rng.gen::<Label>() | 1;
    let mut zero = vec![0 as Label; c.n_wires()];
    for g in c.input_groups() {
        for w in &g.wires {
            zero[w.index()] = rng.gen();
        }
    }
    let mut tables = Vec::with_capacity(c.and_count() * TABLE_BYTES);
    for (gi, g) in c.gates().iter().enumerate() {
        match *g {
            Gate::Xor { a, b, out } => zero[out.index()] = zero[a.index()] ^ zero[b.index()],
            Gate::Not { a, out } => zero[out.index()] = zero[a.index()] ^ delta,
            Gate::And { a, b, out } => {
                let o0: Label = rng.gen();
                zero[out.index()] = o0;
                let mut rows = [[0u8; ROW_BYTES]; 4];
                for i in 0..2 {
                    for j in 0..2 {
                        let la = zero[a.index()] ^ if i == 1 { delta } else { 0 };
                        let lb = zero[b.index()] ^ if j == 1 { delta } else { 0 };
                        let lo = o0 ^ if i & j == 1 { delta } else { 0 };
                        rows[2 * lsb(la) + lsb(lb)] = seal(row_pad(la, lb, gi as u64), lo);
                    }
                }
                for r in rows {
                    tables.extend_from_slice(&r);
                }
            }
        }
    }
    Garbling { delta, zero, tables }
}

/// Evaluates a garbled circuit given one label per input wire.
pub fn evaluate_garbled(c: &BooleanCircuit, tables: &[u8], labels: &mut [Label]) -> Result<(), SmpcError> {
    if tables.len() != c.and_count() * TABLE_BYTES {
        return Err(SmpcError::Protocol(format!("garbled tables have {} bytes", tables.len())));
    }
    let mut t = 0;
    for (gi, g) in c.gates().iter().enumerate() {
        match *g {
            Gate::Xor { a, b, out } => labels[out.index()] = labels[a.index()] ^ labels[b.index()],
            Gate::Not { a, out } => labels[out.index()] = labels[a.index()],
            Gate::And { a, b, out } => {
                let (la, lb) = (labels[a.index()], labels[b.index()]);
                let row = 2 * lsb(la) + lsb(lb);
                let off = t * TABLE_BYTES + row * ROW_BYTES;
                labels[out.index()] = open_row(row_pad(la, lb, gi as u64), &tables[off..off + ROW_BYTES])
                    .ok_or(SmpcError::LabelIntegrity { gate: gi })?;
                t += 1;
            }
        }
    }
    Ok(())
}

fn labels_payload(labels: impl IntoIterator<Item = Label>) -> Vec<u8> {
    labels.into_iter().flat_map(|l| l.to_be_bytes()).collect()
}

/// Runs the garbled-circuit protocol. `garbler` is the party that garbles;
/// the other evaluates. `material` must hold the label-transfer pads
/// (garbler) or choices (evaluator) for every evaluator input bit.
pub fn yao_execute<C: Channel, R: Rng + ?Sized>(
    circuit: &BooleanCircuit,
    me: Party,
    garbler: Party,
    my_input: &Bits,
    session: &mut Session<C>,
    material: &SetupMaterial,
    rng: &mut R,
) -> Result<BitShares, SmpcError> {
    let expected = circuit.input_len(me);
    if my_input.len() != expected {
        return Err(CircuitError::MissingInput { party: me, expected, got: my_input.len() }.into());
    }
    let evaluator = garbler.other();
    let ev_wires = circuit.input_wires(evaluator);
    let ga_wires = circuit.input_wires(garbler);

    if me == garbler {
        if material.ot_pads.len() < ev_wires.len() {
            return Err(SmpcError::Protocol("too few label-transfer pads".into()));
        }
        let g = garble(circuit, rng);
        session.next_round();
        session.send(FrameKind::GarbledTables, g.tables)?;

        session.begin_online();
        session.next_round();
        let corrections = session.recv(FrameKind::Labels)?;
        let e = Bits::from_bytes(&corrections, ev_wires.len())
            .filter(|_| corrections.len() == ev_wires.len().div_ceil(8))
            .ok_or_else(|| SmpcError::Protocol("bad label-transfer corrections".into()))?;

        session.next_round();
        let own = ga_wires.iter().zip(my_input.iter()).map(|(w, x)| g.zero[w.index()] ^ if x { g.delta } else { 0 });
        let mut payload = labels_payload(own);
        for (i, w) in ev_wires.iter().enumerate() {
            let m0 = g.zero[w.index()];
            let m1 = m0 ^ g.delta;
            let pads = material.ot_pads[i];
            let ei = e.get(i) as usize;
            payload.extend_from_slice(&(m0 ^ pads[ei]).to_be_bytes());
            payload.extend_from_slice(&(m1 ^ pads[1 ^ ei]).to_be_bytes());
        }
        session.send(FrameKind::Labels, payload)?;
        Ok(BitShares(Bits::from_bools(circuit.outputs().iter().map(|w| lsb(g.zero[w.index()]) == 1))))
    } else {
        if material.ot_chosen.len() < ev_wires.len() {
            return Err(SmpcError::Protocol("too few label-transfer choices".into()));
        }
        session.next_round();
        let tables = session.recv(FrameKind::GarbledTables)?;

        session.begin_online();
        session.next_round();
        let e = Bits::from_bools((0..ev_wires.len()).map(|i| my_input.get(i) ^ material.ot_choices.get(i)));
        session.send(FrameKind::Labels, e.to_bytes())?;

        session.next_round();
        let payload = session.recv(FrameKind::Labels)?;
        let mut r = PayloadReader::new(&payload);
        let mut labels = vec![0 as Label; circuit.n_wires()];
        for w in &ga_wires {
            labels[w.index()] = r.u128()?;
        }
        for (i, w) in ev_wires.iter().enumerate() {
            let y = [r.u128()?, r.u128()?];
            labels[w.index()] = y[my_input.get(i) as usize] ^ material.ot_chosen[i];
        }
        r.finish()?;
        evaluate_garbled(circuit, &tables, &mut labels)?;
        Ok(BitShares(Bits::from_bools(circuit.outputs().iter().map(|w| lsb(labels[w.index()]) == 1))))
    }
}
