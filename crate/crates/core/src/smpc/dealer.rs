//! Trusted-dealer setup: Beaver triples for GMW and random label transfers
//! (precomputed oblivious transfers) for garbled-circuit input labels.
//!
//! This is a simulation of the semi-honest setup functionality, not a
//! cryptographic oblivious-transfer protocol. Each party obtains its half of
//! the material directly from the dealer; nothing the dealer hands to one
//! party is ever sent to the other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::frame::PayloadReader;
use super::{Label, SmpcError};
use crate::bits::Bits;
use crate::circuits::Party;

/// A party's shares of `n` bit-sliced Beaver triples.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripleShares {
    pub a: Bits,
    pub b: Bits,
    pub c: Bits,
}

impl TripleShares {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Precomputed label transfer. The sender holds random pads `(r0, r1)`;
/// the receiver holds a random choice bit `c` and `r_c`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SetupMaterial {
    pub triples: TripleShares,
    pub ot_pads: Vec<[Label; 2]>,
    pub ot_choices: Bits,
    pub ot_chosen: Vec<Label>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct MaterialNeeds {
    pub triples: usize,
    pub label_transfers: usize,
}

/// Generates correlated material. `ot_sender` receives the pads, the other
/// party the choices.
pub fn dealer_gen<R: Rng + ?Sized>(
    n_triples: usize,
    n_label_transfers: usize,
    ot_sender: Party,
    rng: &mut R,
) -> (SetupMaterial, SetupMaterial) {
    let a = Bits::random(n_triples, rng);
    let b = Bits::random(n_triples, rng);
    let c = a.and(&b);
    let (a0, b0, c0) = (Bits::random(n_triples, rng), Bits::random(n_triples, rng), Bits::random(n_triples, rng));
    let t0 = TripleShares { a: a0.clone(), b: b0.clone(), c: c0.clone() };
    let t1 = TripleShares { a: a.xor(&a0), b: b.xor(&b0), c: c.xor(&c0) };

    let pads: Vec<[Label; 2]> = (0..n_label_transfers).map(|_| [rng.gen(), rng.gen()]).collect();
    let choices = Bits::random(n_label_transfers, rng);
    let chosen = pads.iter().enumerate().map(|(i, p)| p[choices.get(i) as usize]).collect();
    let sender = SetupMaterial { ot_pads: pads, ..Default::default() };
    let receiver = SetupMaterial { ot_choices: choices, ot_chosen: chosen, ..Default::default() };
    let (mut ma, mut mb) = match ot_sender {
        Party::A => (sender, receiver),
        Party::B => (receiver, sender),
    };
    ma.triples = t0;
    mb.triples = t1;
    (ma, mb)
}

/// Deterministic dealer: the material for a session is a pure function of
/// the dealer seed and the session nonce, so both parties can fetch their
/// halves independently.
#[derive(Clone, Copy, Debug)]
pub struct Dealer {
    seed: u64,
}

impl Dealer {
    pub fn new(seed: u64) -> Self {
        Dealer { seed }
    }

    pub fn material(&self, nonce: u64, party: Party, needs: MaterialNeeds, ot_sender: Party) -> SetupMaterial {
        let mut h = Sha256::new();
        h.update(b"prelude-dealer");
        h.update(self.seed.to_be_bytes());
        h.update(nonce.to_be_bytes());
        let mut rng = ChaCha20Rng::from_seed(h.finalize().into());
        let (a, b) = dealer_gen(needs.triples, needs.label_transfers, ot_sender, &mut rng);
        match party {
            Party::A => a,
            Party::B => b,
        }
    }
}

impl SetupMaterial {
    /// Serialised form, used for byte accounting and dealer delivery.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.triples.len() as u64).to_be_bytes());
        for bits in [&self.triples.a, &self.triples.b, &self.triples.c] {
            out.extend_from_slice(&bits.to_bytes());
        }
        out.extend_from_slice(&(self.ot_pads.len() as u64).to_be_bytes());
        for p in &self.ot_pads {
            out.extend_from_slice(&p[0].to_be_bytes());
            out.extend_from_slice(&p[1].to_be_bytes());
        }
        out.extend_from_slice(&(self.ot_chosen.len() as u64).to_be_bytes());
        out.extend_from_slice(&self.ot_choices.to_bytes());
        for l in &self.ot_chosen {
            out.extend_from_slice(&l.to_be_bytes());
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, SmpcError> {
        let mut r = PayloadReader::new(buf);
        let n = r.u64()? as usize;
        let mut bits = || -> Result<Bits, SmpcError> {
            Bits::from_bytes(r.bytes(n.div_ceil(8))?, n).ok_or_else(|| SmpcError::Protocol("short triple block".into()))
        };
        let triples = TripleShares { a: bits()?, b: bits()?, c: bits()? };
        let np = r.u64()? as usize;
        let ot_pads = (0..np).map(|_| Ok([r.u128()?, r.u128()?])).collect::<Result<Vec<_>, SmpcError>>()?;
        let nc = r.u64()? as usize;
        let ot_choices = Bits::from_bytes(r.bytes(nc.div_ceil(8))?, nc).unwrap();
        let ot_chosen = (0..nc).map(|_| Ok(r.u128()?)).collect::<Result<Vec<_>, SmpcError>>()?;
        r.finish()?;
        Ok(SetupMaterial { triples, ot_pads, ot_choices, ot_chosen })
    }
}

/// Sequential consumer of a party's triples.
pub struct TripleSource {
    shares: TripleShares,
    next: usize,
}

impl TripleSource {
    pub fn new(shares: TripleShares) -> Self {
        TripleSource { shares, next: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.shares.len() - self.next
    }

    /// Reserves `n` triples and returns the index of the first.
    pub fn take(&mut self, n: usize) -> Result<usize, SmpcError> {
        if self.remaining() < n {
            return Err(SmpcError::TripleExhausted { needed: n, available: self.remaining() });
        }
        let start = self.next;
        self.next += n;
        Ok(start)
    }

    /// Triple shares `(a, b, c)` at index `i`.
    #[inline]
    pub fn get(&self, i: usize) -> (bool, bool, bool) {
        (self.shares.a.get(i), self.shares.b.get(i), self.shares.c.get(i))
    }
}
