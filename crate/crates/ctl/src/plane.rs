//! Exchange nodes and the event-driven control plane connecting them.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use prelude_bgpsim::{DeflectionPolicy, EdgeChange, GraphError, Network, PolicyError, RibState};
use prelude_core::distinct_match::{self, plaintext_answer, Holder, NextHopId, QueryOptions, RuleEntry, RuleTable};
use prelude_core::smpc::Backend;
use prelude_core::{Asn, Prefix, SdxId, TernaryRule};
use thiserror::Error;

use crate::log::LogLine;
use crate::msg::{Change, ControlMsg};
use crate::verify::{self, HopSource, Point, Trace, Verdict, VerifyError, VerifyRequest};

/// How remote rule tables are consulted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evaluation {
    /// Distinct-Match over a two-party session per query.
    Secure { backend: Backend, delay: Duration },
    /// The plaintext answer, for large simulations. Yields the same hop sets
    /// as the secure path (checked by differential tests).
    Clear,
}

/// Which hops a queried point reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Detector {
    /// Hops of rules overlapping the candidate.
    Prelude,
    /// Hops of every rule for the prefix, regardless of match.
    Sidr,
}

impl Detector {
    pub fn name(self) -> &'static str {
        match self {
            Detector::Prelude => "prelude",
            Detector::Sidr => "sidr",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CtlError {
    #[error("invalid policy: {0}")]
    InvalidPolicy(#[from] PolicyError),
    #[error("rule width {got} differs from the plane's {expected}")]
    Width { expected: usize, got: usize },
    #[error("unknown exchange {0}")]
    UnknownSdx(SdxId),
    #[error("unknown prefix {0}")]
    UnknownPrefix(Prefix),
    #[error("policy id {0} already active")]
    DuplicateId(u64),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActiveRule {
    pub policy: DeflectionPolicy,
    pub budget: usize,
    /// ASes whose routes the acceptance relied on.
    pub deps: BTreeSet<Asn>,
    /// Points consulted while verifying.
    pub queried: BTreeSet<Point>,
}

/// One exchange's verifier state.
#[derive(Debug)]
pub struct SdxNode {
    pub id: SdxId,
    pub table: Arc<RuleTable>,
    holder: Holder,
    pub active: BTreeMap<u64, ActiveRule>,
    /// Exchanges to notify when a (prefix, member) rule set changes.
    pub subscribers: BTreeMap<(Prefix, Asn), BTreeSet<SdxId>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Install { policy: DeflectionPolicy, budget: usize },
    Remove { sdx: SdxId, id: u64 },
    BgpUpdate(EdgeChange),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Installed(Verdict),
    Removed(RemoveAck),
    Reverified(Vec<(u64, Verdict)>),
    Failed(CtlError),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RemoveAck {
    pub removed: bool,
    pub notified: usize,
    pub reverified: Vec<(u64, Verdict)>,
}

pub struct ControlPlane {
    network: Network,
    nodes: BTreeMap<SdxId, SdxNode>,
    eval: Evaluation,
    width: usize,
    seed: u64,
    clock: u64,
    nonce: u64,
    unreachable: BTreeSet<SdxId>,
    log: Vec<LogLine>,
}

/// Hop source backed by the plane's nodes, seen from exchange `local`.
struct NodeSource<'a> {
    nodes: &'a BTreeMap<SdxId, SdxNode>,
    local: SdxId,
    detector: Detector,
    eval: Evaluation,
    seed: u64,
    nonce: &'a mut u64,
    unreachable: &'a BTreeSet<SdxId>,
    /// (exchange, prefix, member, k) per served query.
    served: Vec<(SdxId, Prefix, Asn, usize)>,
}

impl NodeSource<'_> {
    fn table_hops(&self, node: &SdxNode, point: Point, prefix: Prefix, rule: &TernaryRule) -> BTreeSet<Asn> {
        let entries = node.table.entries(prefix, Some(point.asn));
        match self.detector {
            Detector::Sidr => entries.iter().map(|e| e.next_hop.asn).collect(),
            Detector::Prelude => plaintext_answer(rule, &entries).hops.into_iter().map(|h| h.asn).collect(),
        }
    }

    fn node(&self, point: Point) -> Result<&SdxNode, VerifyError> {
        if self.unreachable.contains(&point.sdx) && point.sdx != self.local {
            return Err(VerifyError::QueryFailed { sdx: point.sdx, reason: "unreachable".into() });
        }
        self.nodes
            .get(&point.sdx)
            .ok_or(VerifyError::QueryFailed { sdx: point.sdx, reason: "no such exchange".into() })
    }
}

impl HopSource for NodeSource<'_> {
    fn hops(&mut self, point: Point, prefix: Prefix, rule: &TernaryRule) -> Result<BTreeSet<Asn>, VerifyError> {
        Ok(self.hops_batch(&[point], prefix, rule)?.remove(0))
    }

    fn hops_batch(
        &mut self,
        points: &[Point],
        prefix: Prefix,
        rule: &TernaryRule,
    ) -> Result<Vec<BTreeSet<Asn>>, VerifyError> {
        let mut out: Vec<Option<BTreeSet<Asn>>> = vec![None; points.len()];
        let mut remote = Vec::new();
        for (i, &p) in points.iter().enumerate() {
            let node = self.node(p)?;
            let clear = p.sdx == self.local || self.detector == Detector::Sidr || self.eval == Evaluation::Clear;
            if clear {
                out[i] = Some(self.table_hops(node, p, prefix, rule));
                if p.sdx != self.local {
                    self.served.push((p.sdx, prefix, p.asn, node.table.entries(prefix, Some(p.asn)).len()));
                }
            } else {
                *self.nonce += 1;
                remote.push((i, p, *self.nonce));
            }
        }
        if let Evaluation::Secure { backend, delay } = self.eval {
            // One level's queries run concurrently.
            let results: Vec<_> = thread::scope(|s| {
                let handles: Vec<_> = remote
                    .iter()
                    .map(|&(_, p, nonce)| {
                        let holder = &self.nodes[&p.sdx].holder;
                        let opts = QueryOptions {
                            backend,
                            delay,
                            dealer_seed: self.seed,
                            querier_seed: self.seed ^ u64::from(self.local.0),
                            holder_seed: self.seed ^ (u64::from(p.sdx.0) << 16),
                            nonce,
                        };
                        s.spawn(move || distinct_match::query(rule, holder, prefix, Some(p.asn), &opts))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("query thread panicked")).collect()
            });
            for (&(i, p, _), r) in remote.iter().zip(results) {
                let run = r.map_err(|e| VerifyError::QueryFailed { sdx: p.sdx, reason: e.to_string() })?;
                self.served.push((p.sdx, prefix, p.asn, run.served.k));
                out[i] = Some(run.result.hops.into_iter().map(|h| h.asn).collect());
            }
        }
        Ok(out.into_iter().map(|o| o.expect("every point answered")).collect())
    }
}

fn shuffle_key(seed: u64, sdx: SdxId) -> u64 {
    seed.rotate_left(21) ^ 0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(u64::from(sdx.0) + 1)
}

impl ControlPlane {
    /// A plane with one node per exchange of `network`, for rules of `width` bits.
    pub fn new(network: Network, eval: Evaluation, width: usize, seed: u64) -> Self {
        let nodes = network
            .sites
            .iter()
            .map(|s| {
                let table = Arc::new(RuleTable::new());
                let holder = Holder::new(s.id, table.clone(), shuffle_key(seed, s.id));
                (s.id, SdxNode { id: s.id, table, holder, active: BTreeMap::new(), subscribers: BTreeMap::new() })
            })
            .collect();
        ControlPlane { network, nodes, eval, width, seed, clock: 0, nonce: 0, unreachable: BTreeSet::new(), log: Vec::new() }
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn node(&self, sdx: SdxId) -> Option<&SdxNode> {
        self.nodes.get(&sdx)
    }

    pub fn log(&self) -> &[LogLine] {
        &self.log
    }

    pub fn push_log(&mut self, line: LogLine) {
        self.log.push(line);
    }

    pub fn take_log(&mut self) -> Vec<LogLine> {
        std::mem::take(&mut self.log)
    }

    pub fn time(&self) -> u64 {
        self.clock
    }

    /// Makes queries to `sdx` fail, as if it were unreachable.
    pub fn set_unreachable(&mut self, sdx: SdxId, down: bool) {
        if down {
            self.unreachable.insert(sdx);
        } else {
            self.unreachable.remove(&sdx);
        }
    }

    /// Active policies across all exchanges, ordered by (exchange, id).
    pub fn active_policies(&self) -> Vec<&DeflectionPolicy> {
        self.nodes.values().flat_map(|n| n.active.values().map(|a| &a.policy)).collect()
    }

    pub fn active_for(&self, prefix: Prefix) -> Vec<&DeflectionPolicy> {
        self.active_policies().into_iter().filter(|p| p.prefix == prefix).collect()
    }

    fn rib(&self, prefix: Prefix) -> Result<&RibState, CtlError> {
        self.network.rib(prefix).ok_or(CtlError::UnknownPrefix(prefix))
    }

    fn check(&self, policy: &DeflectionPolicy) -> Result<(), CtlError> {
        if !self.nodes.contains_key(&policy.sdx) {
            return Err(CtlError::UnknownSdx(policy.sdx));
        }
        if policy.rule.width() != self.width {
            return Err(CtlError::Width { expected: self.width, got: policy.rule.width() });
        }
        policy.validate(&self.network.sites, self.rib(policy.prefix)?)?;
        Ok(())
    }

    fn run_verify(&mut self, req: &VerifyRequest, detector: Detector) -> (Verdict, verify::Exploration) {
        let rib = self.network.rib(req.prefix).expect("checked");
        let mut source = NodeSource {
            nodes: &self.nodes,
            local: req.origin_sdx,
            detector,
            eval: self.eval,
            seed: self.seed,
            nonce: &mut self.nonce,
            unreachable: &self.unreachable,
            served: Vec::new(),
        };
        let out = verify::verify(req, rib, &self.network.sites, &mut source);
        let served = source.served;
        self.log_served(served);
        out
    }

    fn log_served(&mut self, served: Vec<(SdxId, Prefix, Asn, usize)>) {
        for (sdx, prefix, member, k) in served {
            let line = LogLine::new(self.clock, sdx, "serve").with("prefix", prefix).with("member", member).with("k", k);
            self.log.push(line);
        }
    }

    /// Full-depth exploration without side effects on rule tables, for
    /// evaluating many budgets at once.
    pub fn trace(&mut self, policy: &DeflectionPolicy, detector: Detector) -> Result<Trace, CtlError> {
        self.check(policy)?;
        let rib = self.network.rib(policy.prefix).expect("checked");
        let req = VerifyRequest::new(policy.clone(), 0);
        let mut source = NodeSource {
            nodes: &self.nodes,
            local: policy.sdx,
            detector,
            eval: self.eval,
            seed: self.seed,
            nonce: &mut self.nonce,
            unreachable: &self.unreachable,
            served: Vec::new(),
        };
        let t = verify::trace(&req, rib, &self.network.sites, &mut source)?;
        Ok(t)
    }

    /// Verifies a candidate deflection and, if accepted, installs it.
    pub fn handle_install(&mut self, req: VerifyRequest) -> Result<Verdict, CtlError> {
        req.validate()?;
        self.check(&req.policy)?;
        let s = req.origin_sdx;
        if self.nodes[&s].active.contains_key(&req.policy.id) {
            return Err(CtlError::DuplicateId(req.policy.id));
        }
        self.clock += 1;
        let (verdict, ex) = self.run_verify(&req, Detector::Prelude);
        self.log.push(
            LogLine::new(self.clock, s, "verify")
                .with("policy", req.policy.id)
                .with("owner", req.requester)
                .with("prefix", req.prefix)
                .with("budget", req.budget)
                .with("queries", ex.queried.len())
                .with("verdict", verdict),
        );
        if verdict.accepted() {
            let mut deps = ex.consulted.clone();
            deps.insert(req.policy.owner);
            deps.insert(req.policy.deflect_to);
            self.activate(ActiveRule { policy: req.policy, budget: req.budget, deps, queried: ex.queried });
        }
        Ok(verdict)
    }

    /// The match-agnostic baseline: same exploration, but every rule of a
    /// queried member counts as a hop. Changes no state.
    pub fn sidr_baseline(&mut self, req: &VerifyRequest) -> Result<Verdict, CtlError> {
        req.validate()?;
        self.check(&req.policy)?;
        self.clock += 1;
        let (verdict, _) = self.run_verify(req, Detector::Sidr);
        self.log.push(
            LogLine::new(self.clock, req.origin_sdx, "sidr")
                .with("policy", req.policy.id)
                .with("owner", req.requester)
                .with("prefix", req.prefix)
                .with("budget", req.budget)
                .with("verdict", verdict),
        );
        Ok(verdict)
    }

    /// Registers a policy without verification, for replaying a known-safe
    /// state.
    pub fn install_unchecked(&mut self, policy: DeflectionPolicy, budget: usize) -> Result<(), CtlError> {
        self.check(&policy)?;
        let deps = BTreeSet::from([policy.owner, policy.deflect_to]);
        self.activate(ActiveRule { policy, budget, deps, queried: BTreeSet::new() });
        Ok(())
    }

    fn activate(&mut self, rule: ActiveRule) {
        let p = &rule.policy;
        let (s, prefix, owner) = (p.sdx, p.prefix, p.owner);
        let entry = RuleEntry {
            id: p.id,
            rule: p.rule.clone(),
            next_hop: NextHopId::new(s, p.deflect_to),
            owner,
            prefix,
        };
        self.nodes[&s].table.register(entry).expect("validated policy");
        for q in rule.queried.iter().filter(|q| q.sdx != s) {
            let msg = ControlMsg::Subscribe { subscriber: s, prefix, member: q.asn }.transmit();
            if let ControlMsg::Subscribe { subscriber, prefix, member } = msg {
                let node = self.nodes.get_mut(&q.sdx).expect("queried exchange exists");
                if node.subscribers.entry((prefix, member)).or_default().insert(subscriber) {
                    self.log.push(
                        LogLine::new(self.clock, q.sdx, "subscribe").with("from", subscriber).with("prefix", prefix).with("member", member),
                    );
                }
            }
        }
        self.nodes.get_mut(&s).unwrap().active.insert(rule.policy.id, rule);
        self.notify(s, prefix, owner, Change::Registered);
    }

    /// Sends NOTIFY_CHANGE to every subscriber; returns them.
    fn notify(&mut self, sdx: SdxId, prefix: Prefix, member: Asn, change: Change) -> Vec<SdxId> {
        let subs: Vec<SdxId> =
            self.nodes[&sdx].subscribers.get(&(prefix, member)).into_iter().flatten().copied().collect();
        for &sub in &subs {
            let msg = ControlMsg::NotifyChange { sdx, prefix, member, change }.transmit();
            if let ControlMsg::NotifyChange { change, .. } = msg {
                let what = match change {
                    Change::Registered => "registered",
                    Change::Removed => "removed",
                };
                self.log.push(
                    LogLine::new(self.clock, sub, "notify")
                        .with("from", sdx)
                        .with("prefix", prefix)
                        .with("member", member)
                        .with("change", what),
                );
            }
        }
        subs
    }

    fn deactivate(&mut self, sdx: SdxId, id: u64) -> Option<ActiveRule> {
        let rule = self.nodes.get_mut(&sdx)?.active.remove(&id)?;
        let p = &rule.policy;
        self.nodes[&sdx].table.deregister(p.prefix, p.owner, id);
        Some(rule)
    }

    /// Removes a policy and lets subscribers re-check rules that consulted it.
    pub fn handle_remove(&mut self, sdx: SdxId, id: u64) -> RemoveAck {
        self.clock += 1;
        let Some(rule) = self.deactivate(sdx, id) else {
            log::warn!("remove of unknown rule {id} at {sdx}");
            self.log.push(LogLine::new(self.clock, sdx, "remove").with("policy", id).with("known", false));
            return RemoveAck::default();
        };
        let p = rule.policy;
        self.log.push(LogLine::new(self.clock, sdx, "remove").with("policy", id).with("owner", p.owner).with("prefix", p.prefix));
        let subs = self.notify(sdx, p.prefix, p.owner, Change::Removed);
        let point = Point { sdx, asn: p.owner };
        let mut reverified = Vec::new();
        for sub in &subs {
            let dependent: Vec<u64> = self.nodes[sub]
                .active
                .values()
                .filter(|a| a.policy.prefix == p.prefix && a.queried.contains(&point))
                .map(|a| a.policy.id)
                .collect();
            for dep in dependent {
                reverified.push((dep, self.reverify(*sub, dep)));
            }
        }
        RemoveAck { removed: true, notified: subs.len(), reverified }
    }

    /// Re-runs verification of an active rule against the current state and
    /// deactivates it if it no longer passes.
    fn reverify(&mut self, sdx: SdxId, id: u64) -> Verdict {
        let rule = self.nodes[&sdx].active[&id].clone();
        let req = VerifyRequest::new(rule.policy.clone(), rule.budget);
        let (verdict, ex) = self.run_verify(&req, Detector::Prelude);
        self.log.push(
            LogLine::new(self.clock, sdx, "reverify")
                .with("policy", id)
                .with("owner", rule.policy.owner)
                .with("prefix", rule.policy.prefix)
                .with("verdict", verdict),
        );
        if verdict.accepted() {
            let a = self.nodes.get_mut(&sdx).unwrap().active.get_mut(&id).unwrap();
            a.deps = ex.consulted;
            a.deps.insert(rule.policy.owner);
            a.deps.insert(rule.policy.deflect_to);
            a.queried = ex.queried;
        } else {
            let p = self.deactivate(sdx, id).expect("active").policy;
            self.log.push(LogLine::new(self.clock, sdx, "deactivate").with("policy", id).with("owner", p.owner).with("prefix", p.prefix));
            self.notify(sdx, p.prefix, p.owner, Change::Removed);
        }
        verdict
    }

    /// Applies a routing change and re-verifies every active rule whose
    /// accepted state relied on a route that changed.
    pub fn handle_bgp_update(&mut self, change: EdgeChange) -> Result<Vec<(u64, Verdict)>, CtlError> {
        self.clock += 1;
        let old = self.network.apply(change)?;
        for &sdx in self.nodes.keys() {
            self.log.push(LogLine::new(self.clock, sdx, "bgp_update").with("changed_prefixes", old.len()));
        }
        let mut out = Vec::new();
        for (prefix, old_rib) in &old {
            let new_rib = self.network.rib(*prefix).expect("known prefix").clone();
            let affected: Vec<(SdxId, u64)> = self
                .nodes
                .values()
                .flat_map(|n| n.active.values().map(move |a| (n.id, a)))
                .filter(|(_, a)| a.policy.prefix == *prefix && a.deps.iter().any(|&d| old_rib.path(d) != new_rib.path(d)))
                .map(|(s, a)| (s, a.policy.id))
                .collect();
            for (sdx, id) in affected {
                if self.nodes[&sdx].active.contains_key(&id) {
                    out.push((id, self.reverify(sdx, id)));
                }
            }
        }
        Ok(out)
    }

    /// Processes events in order.
    pub fn run(&mut self, events: impl IntoIterator<Item = Event>) -> Vec<Outcome> {
        events
            .into_iter()
            .map(|e| match e {
                Event::Install { policy, budget } => match self.handle_install(VerifyRequest::new(policy, budget)) {
                    Ok(v) => Outcome::Installed(v),
                    Err(e) => Outcome::Failed(e),
                },
                Event::Remove { sdx, id } => Outcome::Removed(self.handle_remove(sdx, id)),
                Event::BgpUpdate(c) => match self.handle_bgp_update(c) {
                    Ok(v) => Outcome::Reverified(v),
                    Err(e) => Outcome::Failed(e),
                },
            })
            .collect()
    }
}
