//! Path exploration for one candidate deflection.
//!
//! A point `(sdx, asn)` is where `asn` hands traffic to its BGP next hop
//! across exchange `sdx`, so `asn`'s rules at `sdx` may deflect it. The
//! exploration starts at the requester's point with the candidate's target
//! as its only hop. For every hop it walks the target's BGP path, and each
//! exchange crossing on that path becomes a successor point, which is asked
//! for the hops of its rules that overlap the candidate rule.
//!
//! A chain of successive deflections that revisits a point is a potential
//! loop; a chain longer than the budget allows cannot be cleared. Both
//! reject. The decision therefore depends only on the longest hop chain
//! from the start (infinite when a cycle is reachable), which is what
//! [`Trace`] records.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use prelude_bgpsim::{DeflectionPolicy, RibState, SdxSites};
use prelude_core::{Asn, Prefix, SdxId, TernaryRule};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub sdx: SdxId,
    pub asn: Asn,
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.sdx, self.asn)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("query to {sdx} failed: {reason}")]
    QueryFailed { sdx: SdxId, reason: String },
    #[error("malformed request: {0}")]
    BadRequest(String),
}

/// Answers "which targets do `point`'s rules for `prefix` send traffic
/// overlapping `rule` to".
pub trait HopSource {
    fn hops(&mut self, point: Point, prefix: Prefix, rule: &TernaryRule) -> Result<BTreeSet<Asn>, VerifyError>;

    /// Answers a whole exploration level. Sources that can overlap queries
    /// override this.
    fn hops_batch(
        &mut self,
        points: &[Point],
        prefix: Prefix,
        rule: &TernaryRule,
    ) -> Result<Vec<BTreeSet<Asn>>, VerifyError> {
        points.iter().map(|&p| self.hops(p, prefix, rule)).collect()
    }
}

/// A request to verify `policy`, as sent by the owner to its exchange.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyRequest {
    pub requester: Asn,
    pub origin_sdx: SdxId,
    pub policy: DeflectionPolicy,
    pub prefix: Prefix,
    pub visited: Vec<(SdxId, Asn)>,
    pub budget: usize,
}

impl VerifyRequest {
    pub fn new(policy: DeflectionPolicy, budget: usize) -> Self {
        VerifyRequest {
            requester: policy.owner,
            origin_sdx: policy.sdx,
            prefix: policy.prefix,
            visited: vec![(policy.sdx, policy.owner)],
            policy,
            budget,
        }
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        let bad = |m: &str| Err(VerifyError::BadRequest(m.to_string()));
        if self.requester != self.policy.owner || self.origin_sdx != self.policy.sdx {
            return bad("requester and origin exchange must match the policy");
        }
        if self.prefix != self.policy.prefix {
            return bad("prefix must match the policy");
        }
        if self.visited.first() != Some(&(self.origin_sdx, self.requester)) {
            return bad("visited must begin with the requester's point");
        }
        Ok(())
    }

    pub fn start(&self) -> Point {
        Point { sdx: self.origin_sdx, asn: self.requester }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reason {
    Safe,
    /// A chain of deflections returns to a point already on it; carries the
    /// exchange where the chain closes.
    LoopDetected { closing: SdxId },
    BudgetExhausted,
    QueryFailed,
}

impl Reason {
    pub fn name(self) -> &'static str {
        match self {
            Reason::Safe => "safe",
            Reason::LoopDetected { .. } => "loop_detected",
            Reason::BudgetExhausted => "budget_exhausted",
            Reason::QueryFailed => "query_failed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Verdict {
    pub decision: Decision,
    pub reason: Reason,
}

impl Verdict {
    pub const ACCEPT: Verdict = Verdict { decision: Decision::Accept, reason: Reason::Safe };

    pub fn reject(reason: Reason) -> Self {
        debug_assert!(reason != Reason::Safe);
        Verdict { decision: Decision::Reject, reason }
    }

    pub fn accepted(&self) -> bool {
        self.decision == Decision::Accept
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = if self.accepted() { "accept" } else { "reject" };
        match self.reason {
            Reason::LoopDetected { closing } => write!(f, "{d} reason=loop_detected closing={closing}"),
            r => write!(f, "{d} reason={}", r.name()),
        }
    }
}

/// The explored part of the deflection graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Exploration {
    pub start: Option<Point>,
    /// Hop chains per point: for each hop target, the points on its path.
    pub succ: BTreeMap<Point, Vec<(Asn, Vec<Point>)>>,
    pub depth: BTreeMap<Point, usize>,
    /// Remote points that were asked for hops.
    pub queried: BTreeSet<Point>,
    /// ASes whose BGP paths the exploration followed.
    pub consulted: BTreeSet<Asn>,
}

/// Explores from the requester's point. Points deeper than
/// `max_depth` are not queried; `None` explores everything reachable.
pub fn explore(
    req: &VerifyRequest,
    rib: &RibState,
    sites: &SdxSites,
    source: &mut dyn HopSource,
    max_depth: Option<usize>,
) -> Result<Exploration, VerifyError> {
    let start = req.start();
    let mut ex = Exploration { start: Some(start), ..Default::default() };
    ex.depth.insert(start, 0);
    let mut level: Vec<(Point, BTreeSet<Asn>)> = vec![(start, BTreeSet::from([req.policy.deflect_to]))];
    let mut d = 0;
    while !level.is_empty() {
        let mut next: Vec<Point> = Vec::new();
        for (p, hops) in level {
            let mut chains = Vec::new();
            for w in hops {
                ex.consulted.insert(w);
                let path = rib.path(w).unwrap_or(&[]);
                let pts: Vec<Point> =
                    sites.crossings(path).into_iter().map(|c| Point { sdx: c.sdx, asn: c.from }).collect();
                for &q in &pts {
                    if let Entry::Vacant(e) = ex.depth.entry(q) {
                        e.insert(d + 1);
                        if max_depth.map_or(true, |m| d < m) {
                            next.push(q);
                        }
                    }
                }
                chains.push((w, pts));
            }
            ex.succ.insert(p, chains);
        }
        d += 1;
        if next.is_empty() {
            break;
        }
        let answers = source.hops_batch(&next, req.prefix, &req.policy.rule)?;
        ex.queried.extend(next.iter().copied());
        level = next.into_iter().zip(answers).collect();
    }
    Ok(ex)
}

/// Summary of an exploration from which the verdict under any budget
/// follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Trace {
    /// Longest chain of deflections, counting the candidate itself; `None`
    /// when a cycle is reachable.
    pub longest: Option<usize>,
    /// Smallest depth `d` such that points of depth at most `d` already
    /// contain a cycle, with the exchange that closes it.
    pub loop_at: Option<(usize, SdxId)>,
    pub queries: usize,
}

impl Trace {
    pub fn from_exploration(ex: &Exploration) -> Trace {
        let start = ex.start.expect("exploration has a start");
        let longest = longest_chain(ex, start);
        let max_depth = ex.depth.values().copied().max().unwrap_or(0);
        let loop_at = if longest.is_none() {
            (0..=max_depth).find_map(|d| cycle_within(ex, start, d).map(|s| (d, s)))
        } else {
            None
        };
        Trace { longest, loop_at, queries: ex.queried.len() }
    }

    /// Verdict with `budget` remote deflections allowed after the candidate.
    pub fn verdict(&self, budget: usize) -> Verdict {
        let over = match self.longest {
            None => true,
            Some(l) => l > budget + 1,
        };
        if !over {
            return Verdict::ACCEPT;
        }
        match self.loop_at {
            Some((d, closing)) if d <= budget + 1 => Verdict::reject(Reason::LoopDetected { closing }),
            _ => Verdict::reject(Reason::BudgetExhausted),
        }
    }
}

fn longest_chain(ex: &Exploration, start: Point) -> Option<usize> {
    // Colour DFS; a grey successor means a reachable cycle.
    fn visit(ex: &Exploration, p: Point, memo: &mut BTreeMap<Point, Option<usize>>, grey: &mut BTreeSet<Point>) -> Option<usize> {
        if let Some(&v) = memo.get(&p) {
            return v;
        }
        if !grey.insert(p) {
            return None;
        }
        let mut best = Some(0);
        for (_, pts) in ex.succ.get(&p).map(Vec::as_slice).unwrap_or(&[]) {
            let mut chain = Some(1);
            for &q in pts {
                let sub = visit(ex, q, memo, grey);
                chain = match (chain, sub) {
                    (Some(c), Some(s)) => Some(c.max(1 + s)),
                    _ => None,
                };
            }
            best = match (best, chain) {
                (Some(b), Some(c)) => Some(b.max(c)),
                _ => None,
            };
        }
        grey.remove(&p);
        memo.insert(p, best);
        best
    }
    visit(ex, start, &mut BTreeMap::new(), &mut BTreeSet::new())
}

/// A cycle among points of depth at most `d`, reported by the exchange of
/// the start point when the cycle passes through it.
fn cycle_within(ex: &Exploration, start: Point, d: usize) -> Option<SdxId> {
    let inside = |p: &Point| ex.depth.get(p).is_some_and(|&x| x <= d);
    let succ = |p: Point| -> Vec<Point> {
        ex.succ
            .get(&p)
            .into_iter()
            .flatten()
            .flat_map(|(_, pts)| pts.iter().copied())
            .filter(|q| inside(q))
            .collect()
    };
    let reaches = |from: Point, to: Point| -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = succ(from);
        while let Some(q) = stack.pop() {
            if q == to {
                return true;
            }
            if seen.insert(q) {
                stack.extend(succ(q));
            }
        }
        false
    };
    if reaches(start, start) {
        return Some(start.sdx);
    }
    ex.depth.keys().filter(|p| inside(p)).find(|&&p| reaches(p, p)).map(|p| p.sdx)
}

/// Explores only as deep as `req.budget` requires and decides.
pub fn verify(
    req: &VerifyRequest,
    rib: &RibState,
    sites: &SdxSites,
    source: &mut dyn HopSource,
) -> (Verdict, Exploration) {
    if !req.policy.is_effective(sites, rib) {
        return (Verdict::ACCEPT, Exploration::default());
    }
    match explore(req, rib, sites, source, Some(req.budget + 1)) {
        Ok(ex) => (Trace::from_exploration(&ex).verdict(req.budget), ex),
        Err(_) => (Verdict::reject(Reason::QueryFailed), Exploration::default()),
    }
}

/// Explores everything reachable, for evaluating several budgets at once.
pub fn trace(
    req: &VerifyRequest,
    rib: &RibState,
    sites: &SdxSites,
    source: &mut dyn HopSource,
) -> Result<Trace, VerifyError> {
    if !req.policy.is_effective(sites, rib) {
        return Ok(Trace { longest: Some(0), loop_at: None, queries: 0 });
    }
    Ok(Trace::from_exploration(&explore(req, rib, sites, source, None)?))
}
