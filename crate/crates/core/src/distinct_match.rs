//! Distinct-Match: compare one local rule against a remote rule table and
//! learn only the set of next-hop identifiers of the remote rules that
//! overlap it.
//!
//! The querier (party A) sends a clear envelope naming the prefix, the
//! member whose rules are relevant, the rule width, the backend and a
//! session nonce. The holder (party B) answers with its entry count `k`,
//! permutes its entries with randomness derived from a private key and the
//! nonce, and both run the batch value-mapper circuit. Only the querier
//! receives the reconstructed `k` identifiers; dummies are dropped and the
//! rest collapsed to a set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, RwLock};
use std::thread;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bits::Bits;
use crate::circuits::{build_batch_query, CircuitError, CircuitLayout, Party, DEFAULT_ID_WIDTH};
use crate::ids::{Asn, Prefix, SdxId};
use crate::rulespace::TernaryRule;
use crate::smpc::frame::PayloadReader;
use crate::smpc::runner::{execute, open_outputs, Backend, Reveal};
use crate::smpc::session::{Session, SessionTranscript};
use crate::smpc::{Channel, Dealer, FrameKind, LocalChannel, SmpcError};

/// First deflection on a rule's deflected path: the exchange it happens at
/// and the member that deflects there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NextHopId {
    pub sdx: SdxId,
    pub asn: Asn,
}

impl NextHopId {
    /// Reserved value `v_d` marking a non-overlapping rule.
    pub const DUMMY: NextHopId = NextHopId { sdx: SdxId(0xFFFF), asn: Asn(0xFFFF_FFFF) };

    pub fn new(sdx: SdxId, asn: Asn) -> Self {
        NextHopId { sdx, asn }
    }

    pub fn is_dummy(self) -> bool {
        self == Self::DUMMY
    }

    /// 48-bit packing: SDX id in the high 16 bits, AS number in the low 32.
    pub fn to_u64(self) -> u64 {
        (self.sdx.0 as u64) << 32 | self.asn.0 as u64
    }

    pub fn from_u64(v: u64) -> Self {
        NextHopId { sdx: SdxId((v >> 32) as u16), asn: Asn(v as u32) }
    }
}

impl fmt::Display for NextHopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.sdx, self.asn)
    }
}

/// An installed deflection rule as seen by the exchange that hosts it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleEntry {
    pub id: u64,
    pub rule: TernaryRule,
    pub next_hop: NextHopId,
    pub owner: Asn,
    pub prefix: Prefix,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryResult {
    pub hops: BTreeSet<NextHopId>,
}

impl QueryResult {
    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum DistinctMatchError {
    #[error("query aborted: {0}")]
    Aborted(#[from] SmpcError),
    #[error("bad query envelope: {0}")]
    BadEnvelope(String),
    #[error("next hop {0} is the reserved dummy value")]
    DummyNextHop(NextHopId),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Rule table of one exchange, keyed by prefix and owning member.
/// Readers (queries) run concurrently; registrations are serialised.
#[derive(Debug, Default)]
pub struct RuleTable {
    inner: RwLock<BTreeMap<(Prefix, Asn), Vec<RuleEntry>>>,
}

impl RuleTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry. Registering the same id twice is a no-op; returns
    /// whether the entry is new.
    pub fn register(&self, entry: RuleEntry) -> Result<bool, DistinctMatchError> {
        if entry.next_hop.is_dummy() {
            return Err(DistinctMatchError::DummyNextHop(entry.next_hop));
        }
        let mut map = self.inner.write().expect("rule table lock");
        let list = map.entry((entry.prefix, entry.owner)).or_default();
        if list.iter().any(|e| e.id == entry.id) {
            return Ok(false);
        }
        list.push(entry);
        Ok(true)
    }

    /// Removes an entry; unknown ids are logged and ignored.
    pub fn deregister(&self, prefix: Prefix, owner: Asn, id: u64) -> Option<RuleEntry> {
        let mut map = self.inner.write().expect("rule table lock");
        let removed = map.get_mut(&(prefix, owner)).and_then(|list| {
            let pos = list.iter().position(|e| e.id == id)?;
            Some(list.remove(pos))
        });
        if removed.is_none() {
            log::warn!("deregister of unknown rule {id} ({prefix}, {owner}) ignored");
        }
        map.retain(|_, l| !l.is_empty());
        removed
    }

    /// Entries for `prefix`, restricted to one member if given, in id order.
    pub fn entries(&self, prefix: Prefix, member: Option<Asn>) -> Vec<RuleEntry> {
        let map = self.inner.read().expect("rule table lock");
        let mut out: Vec<RuleEntry> = match member {
            Some(m) => map.get(&(prefix, m)).cloned().unwrap_or_default(),
            None => map.range((prefix, Asn(0))..=(prefix, Asn(u32::MAX))).flat_map(|(_, l)| l.clone()).collect(),
        };
        out.sort_by_key(|e| e.id);
        out
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("rule table lock").values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Plaintext reference answer.
pub fn plaintext_answer(local: &TernaryRule, entries: &[RuleEntry]) -> QueryResult {
    QueryResult {
        hops: entries
            .iter()
            .filter(|e| local.overlaps(&e.rule).expect("rule widths agree"))
            .map(|e| e.next_hop)
            .collect(),
    }
}

/// Clear metadata sent before the secure computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryEnvelope {
    pub prefix: Prefix,
    /// Member whose rules can act on the queried traffic at this exchange.
    pub member: Option<Asn>,
    pub width: u16,
    pub id_width: u8,
    pub backend: Backend,
    pub nonce: u64,
}

impl QueryEnvelope {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(21);
        out.extend_from_slice(&self.prefix.0.to_be_bytes());
        out.push(self.member.is_some() as u8);
        out.extend_from_slice(&self.member.map_or(0, |m| m.0).to_be_bytes());
        out.extend_from_slice(&self.width.to_be_bytes());
        out.push(self.id_width);
        out.push(self.backend.tag());
        out.extend_from_slice(&self.nonce.to_be_bytes());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, DistinctMatchError> {
        let bad = |e: crate::smpc::frame::FrameError| DistinctMatchError::BadEnvelope(e.to_string());
        let mut r = PayloadReader::new(buf);
        let prefix = Prefix(r.u32().map_err(bad)?);
        let has_member = r.u8().map_err(bad)? == 1;
        let member = Asn(r.u32().map_err(bad)?);
        let width = r.u16().map_err(bad)?;
        let id_width = r.u8().map_err(bad)?;
        let tag = r.u8().map_err(bad)?;
        let backend =
            Backend::from_tag(tag).ok_or_else(|| DistinctMatchError::BadEnvelope(format!("backend tag {tag}")))?;
        let nonce = r.u64().map_err(bad)?;
        r.finish().map_err(bad)?;
        Ok(QueryEnvelope { prefix, member: has_member.then_some(member), width, id_width, backend, nonce })
    }
}

const STATUS_OK: u8 = 0;
const STATUS_WIDTH_MISMATCH: u8 = 1;

/// Querier side of one query over an established session. Returns the
/// reconstructed raw vector (one value per holder entry, in the holder's
/// shuffled order).
#[allow(clippy::too_many_arguments)]
fn querier_raw<C: Channel, R: Rng + ?Sized>(
    session: &mut Session<C>,
    local: &TernaryRule,
    prefix: Prefix,
    member: Option<Asn>,
    backend: Backend,
    nonce: u64,
    dealer: &Dealer,
    rng: &mut R,
) -> Result<Vec<NextHopId>, DistinctMatchError> {
    let envelope = QueryEnvelope {
        prefix,
        member,
        width: local.width() as u16,
        id_width: DEFAULT_ID_WIDTH as u8,
        backend,
        nonce,
    };
    session.next_round();
    session.send(FrameKind::VerifyQuery, envelope.encode())?;
    let reply = session.recv(FrameKind::VerifyResult)?;
    let mut r = PayloadReader::new(&reply);
    let status = r.u8().map_err(SmpcError::from)?;
    let k = r.u32().map_err(SmpcError::from)? as usize;
    if status == STATUS_WIDTH_MISMATCH {
        return Err(DistinctMatchError::BadEnvelope(format!("holder rejected width {}", local.width())));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let layout = CircuitLayout::new(k, local.width(), DEFAULT_ID_WIDTH)?;
    let circuit = build_batch_query(&layout)?;
    let share = execute(backend, &circuit, Party::A, &layout.querier_input(local), session, dealer, nonce, rng)?;
    let out = open_outputs(backend, session, Party::A, &share, Reveal::To(Party::A))?.expect("querier receives output");
    Ok(layout.decode_outputs(&out).into_iter().map(NextHopId::from_u64).collect())
}

/// Runs a query and collapses the answer to a set.
#[allow(clippy::too_many_arguments)]
pub fn query_over<C: Channel, R: Rng + ?Sized>(
    session: &mut Session<C>,
    local: &TernaryRule,
    prefix: Prefix,
    member: Option<Asn>,
    backend: Backend,
    nonce: u64,
    dealer: &Dealer,
    rng: &mut R,
) -> Result<QueryResult, DistinctMatchError> {
    let raw = querier_raw(session, local, prefix, member, backend, nonce, dealer, rng)?;
    Ok(QueryResult { hops: raw.into_iter().filter(|h| !h.is_dummy()).collect() })
}

/// What the holder learned from serving a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ServedQuery {
    pub envelope: QueryEnvelope,
    pub k: usize,
}

/// Holder-side state: its table and the key from which per-query
/// permutations are derived.
#[derive(Clone, Debug)]
pub struct Holder {
    pub sdx: SdxId,
    pub table: Arc<RuleTable>,
    shuffle_key: u64,
}

impl Holder {
    pub fn new(sdx: SdxId, table: Arc<RuleTable>, shuffle_key: u64) -> Self {
        Holder { sdx, table, shuffle_key }
    }

    fn permutation_rng(&self, nonce: u64) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(b"prelude-shuffle");
        h.update(self.shuffle_key.to_be_bytes());
        h.update(nonce.to_be_bytes());
        ChaCha20Rng::from_seed(h.finalize().into())
    }

    /// Serves one query arriving on `session`.
    pub fn serve<C: Channel, R: Rng + ?Sized>(
        &self,
        session: &mut Session<C>,
        dealer: &Dealer,
        rng: &mut R,
    ) -> Result<ServedQuery, DistinctMatchError> {
        session.next_round();
        let envelope = QueryEnvelope::decode(&session.recv(FrameKind::VerifyQuery)?)?;
        let mut entries = self.table.entries(envelope.prefix, envelope.member);
        let width = envelope.width as usize;
        let mut reply = Vec::with_capacity(5);
        if entries.iter().any(|e| e.rule.width() != width) || envelope.id_width as usize != DEFAULT_ID_WIDTH {
            reply.push(STATUS_WIDTH_MISMATCH);
            reply.extend_from_slice(&0u32.to_be_bytes());
            session.send(FrameKind::VerifyResult, reply)?;
            return Err(DistinctMatchError::BadEnvelope(format!("query width {width} does not match table")));
        }
        let k = entries.len();
        reply.push(STATUS_OK);
        reply.extend_from_slice(&(k as u32).to_be_bytes());
        session.send(FrameKind::VerifyResult, reply)?;
        if k == 0 {
            return Ok(ServedQuery { envelope, k });
        }
        entries.shuffle(&mut self.permutation_rng(envelope.nonce));
        let layout = CircuitLayout::new(k, width, DEFAULT_ID_WIDTH)?;
        let circuit = build_batch_query(&layout)?;
        let rules: Vec<(TernaryRule, u64)> = entries.iter().map(|e| (e.rule.clone(), e.next_hop.to_u64())).collect();
        let input = layout.holder_input(&rules, NextHopId::DUMMY.to_u64());
        let share = execute(envelope.backend, &circuit, Party::B, &input, session, dealer, envelope.nonce, rng)?;
        open_outputs(envelope.backend, session, Party::B, &share, Reveal::To(Party::A))?;
        Ok(ServedQuery { envelope, k })
    }
}

/// Parameters of an in-process query.
#[derive(Clone, Debug)]
pub struct QueryOptions {
    pub backend: Backend,
    pub delay: Duration,
    pub dealer_seed: u64,
    pub querier_seed: u64,
    pub holder_seed: u64,
    pub nonce: u64,
}

impl QueryOptions {
    pub fn new(backend: Backend, nonce: u64) -> Self {
        QueryOptions { backend, delay: Duration::ZERO, dealer_seed: 0, querier_seed: 1, holder_seed: 2, nonce }
    }
}

/// Outcome of an in-process query with both transcripts.
#[derive(Debug)]
pub struct QueryRun {
    pub result: QueryResult,
    pub querier: SessionTranscript,
    pub holder: SessionTranscript,
    pub served: ServedQuery,
}

fn run_local(
    local: &TernaryRule,
    holder: &Holder,
    prefix: Prefix,
    member: Option<Asn>,
    opts: &QueryOptions,
) -> Result<(Vec<NextHopId>, SessionTranscript, SessionTranscript, ServedQuery), DistinctMatchError> {
    let (ca, cb) = LocalChannel::pair(opts.delay);
    let dealer = Dealer::new(opts.dealer_seed);
    let (qa, hb) = thread::scope(|s| {
        let h = s.spawn(|| {
            let mut session = Session::new(cb);
            let mut rng = ChaCha20Rng::seed_from_u64(opts.holder_seed ^ opts.nonce.rotate_left(17));
            let served = holder.serve(&mut session, &dealer, &mut rng);
            session.finish();
            served.map(|s| (s, session.into_parts().1))
        });
        let mut session = Session::new(ca);
        let mut rng = ChaCha20Rng::seed_from_u64(opts.querier_seed ^ opts.nonce.rotate_left(17));
        let raw = querier_raw(&mut session, local, prefix, member, opts.backend, opts.nonce, &dealer, &mut rng);
        session.finish();
        let qa = raw.map(|r| (r, session.into_parts().1));
        (qa, h.join().expect("holder thread panicked"))
    });
    let (served, ht) = hb?;
    let (raw, qt) = qa?;
    Ok((raw, qt, ht, served))
}

/// Queries `holder` from a fresh in-process session pair.
pub fn query(
    local: &TernaryRule,
    holder: &Holder,
    prefix: Prefix,
    member: Option<Asn>,
    opts: &QueryOptions,
) -> Result<QueryRun, DistinctMatchError> {
    let (raw, querier, holder_t, served) = run_local(local, holder, prefix, member, opts)?;
    let result = QueryResult { hops: raw.into_iter().filter(|h| !h.is_dummy()).collect() };
    Ok(QueryRun { result, querier, holder: holder_t, served })
}

/// Diagnostic form of [`query`] returning the raw reconstructed vector,
/// dummies and duplicates included, in the holder's shuffled order. Used to
/// test shuffling and dummy hygiene; protocol code uses [`query`].
pub fn query_raw(
    local: &TernaryRule,
    holder: &Holder,
    prefix: Prefix,
    member: Option<Asn>,
    opts: &QueryOptions,
) -> Result<Vec<NextHopId>, DistinctMatchError> {
    Ok(run_local(local, holder, prefix, member, opts)?.0)
}

/// Helper for tests and examples: a holder whose table contains `rules`
/// for `prefix` under owner `owner`.
pub fn holder_with(sdx: SdxId, owner: Asn, prefix: Prefix, rules: &[(TernaryRule, NextHopId)], key: u64) -> Holder {
    let table = Arc::new(RuleTable::new());
    for (i, (rule, hop)) in rules.iter().enumerate() {
        table
            .register(RuleEntry { id: i as u64, rule: rule.clone(), next_hop: *hop, owner, prefix })
            .expect("valid entry");
    }
    Holder::new(sdx, table, key)
}

/// Bits of a 48-bit identifier, for callers that build inputs by hand.
pub fn id_bits(id: NextHopId) -> Bits {
    Bits::from_uint(id.to_u64(), DEFAULT_ID_WIDTH)
}
