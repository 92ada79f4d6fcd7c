//! Perfect-knowledge forwarding model and loop oracle.
//!
//! Forwarding at AS `u` towards its BGP next hop `n`: the policies of `u`
//! installed at exchanges where `n` is also a member apply, in order of
//! (exchange id, policy id). The first matching policy sends the packet to
//! its target; otherwise it goes to `n`. The oracle runs this walk on sets
//! of headers rather than single packets, splitting a set whenever a policy
//! matches only part of it, so it is exact without enumerating packets.

use std::collections::BTreeMap;

use prelude_core::{Asn, Packet, SdxId};

use crate::headerspace::CubeSet;
use crate::policy::DeflectionPolicy;
use crate::routes::RibState;
use crate::sites::SdxSites;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Via {
    Bgp,
    Deflect { sdx: SdxId, policy: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hop {
    pub from: Asn,
    pub to: Asn,
    pub via: Via,
}

/// A forwarding cycle and every header that can enter it through a walk
/// started at a deflecting AS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Loop {
    /// Rotated to start at the lowest AS number.
    pub cycle: Vec<Hop>,
    pub headers: CubeSet,
}

impl Loop {
    pub fn ases(&self) -> Vec<Asn> {
        self.cycle.iter().map(|h| h.from).collect()
    }

    pub fn policies(&self) -> Vec<u64> {
        self.cycle
            .iter()
            .filter_map(|h| match h.via {
                Via::Deflect { policy, .. } => Some(policy),
                Via::Bgp => None,
            })
            .collect()
    }
}

/// Forwarding state of one prefix: routes plus the effective policies.
pub struct Forwarding<'a> {
    rib: &'a RibState,
    width: usize,
    by_owner: BTreeMap<Asn, Vec<&'a DeflectionPolicy>>,
}

impl<'a> Forwarding<'a> {
    /// Keeps the policies for this prefix that take effect under `rib`.
    pub fn new(
        rib: &'a RibState,
        sites: &SdxSites,
        policies: impl IntoIterator<Item = &'a DeflectionPolicy>,
        width: usize,
    ) -> Self {
        let mut by_owner: BTreeMap<Asn, Vec<&DeflectionPolicy>> = BTreeMap::new();
        for p in policies {
            assert_eq!(p.rule.width(), width, "policy {} has the wrong width", p.id);
            if p.is_effective(sites, rib) {
                by_owner.entry(p.owner).or_default().push(p);
            }
        }
        for list in by_owner.values_mut() {
            list.sort_by_key(|p| (p.sdx, p.id));
        }
        Forwarding { rib, width, by_owner }
    }

    pub fn deflecting_ases(&self) -> impl Iterator<Item = Asn> + '_ {
        self.by_owner.keys().copied()
    }

    pub fn effective(&self, owner: Asn) -> &[&'a DeflectionPolicy] {
        self.by_owner.get(&owner).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Next hop of a single packet at `at`, or `None` at the origin or
    /// without a route.
    pub fn step(&self, at: Asn, pkt: &Packet) -> Option<Hop> {
        if at == self.rib.origin {
            return None;
        }
        let nh = self.rib.next_hop(at)?;
        for p in self.effective(at) {
            if p.rule.matches(pkt).expect("width checked") {
                return Some(Hop { from: at, to: p.deflect_to, via: Via::Deflect { sdx: p.sdx, policy: p.id } });
            }
        }
        Some(Hop { from: at, to: nh, via: Via::Bgp })
    }

    /// Partitions `set` by the hop each part takes at `at`.
    pub fn split(&self, at: Asn, set: &CubeSet) -> Vec<(Hop, CubeSet)> {
        if at == self.rib.origin {
            return Vec::new();
        }
        let Some(nh) = self.rib.next_hop(at) else {
            return Vec::new();
        };
        let mut rest = set.clone();
        let mut out = Vec::new();
        for p in self.effective(at) {
            if rest.is_empty() {
                break;
            }
            let hit = rest.intersect_rule(&p.rule);
            if !hit.is_empty() {
                out.push((Hop { from: at, to: p.deflect_to, via: Via::Deflect { sdx: p.sdx, policy: p.id } }, hit));
                rest = rest.subtract_rule(&p.rule);
            }
        }
        if !rest.is_empty() {
            out.push((Hop { from: at, to: nh, via: Via::Bgp }, rest));
        }
        out
    }

    fn walk(
        &self,
        at: Asn,
        set: CubeSet,
        trail: &mut Vec<Hop>,
        found: &mut BTreeMap<Vec<Hop>, CubeSet>,
    ) {
        if let Some(pos) = trail.iter().position(|h| h.from == at) {
            let cycle = canonical(&trail[pos..]);
            let e = found.entry(cycle).or_insert_with(|| CubeSet::empty(self.width));
            *e = e.union(&set);
            return;
        }
        for (hop, part) in self.split(at, &set) {
            trail.push(hop);
            self.walk(hop.to, part, trail, found);
            trail.pop();
        }
    }

    fn collect(found: BTreeMap<Vec<Hop>, CubeSet>) -> Vec<Loop> {
        found.into_iter().map(|(cycle, headers)| Loop { cycle, headers }).collect()
    }

    /// Every loop reachable from a deflecting AS.
    pub fn loops(&self) -> Vec<Loop> {
        let mut found = BTreeMap::new();
        for u in self.deflecting_ases() {
            self.walk(u, CubeSet::full(self.width), &mut Vec::new(), &mut found);
        }
        Self::collect(found)
    }

    /// Loops entered through `policy`: walks from its owner with the headers
    /// it actually deflects and keeps cycles containing that deflection.
    pub fn loops_via(&self, policy: &DeflectionPolicy) -> Vec<Loop> {
        let owner = policy.owner;
        let Some((hop, set)) = self
            .split(owner, &CubeSet::full(self.width))
            .into_iter()
            .find(|(h, _)| h.via == Via::Deflect { sdx: policy.sdx, policy: policy.id })
        else {
            return Vec::new();
        };
        let mut found = BTreeMap::new();
        let mut trail = vec![hop];
        self.walk(hop.to, set, &mut trail, &mut found);
        found.retain(|cycle, _| cycle.contains(&hop));
        Self::collect(found)
    }

    /// Largest number of deflections on any walk from a deflecting AS;
    /// `None` if some walk loops.
    pub fn max_deflections(&self) -> Option<usize> {
        fn go(fw: &Forwarding<'_>, at: Asn, set: CubeSet, on: &mut Vec<Asn>) -> Option<usize> {
            if on.contains(&at) {
                return None;
            }
            on.push(at);
            let mut best = Some(0);
            for (hop, part) in fw.split(at, &set) {
                let add = usize::from(matches!(hop.via, Via::Deflect { .. }));
                let sub = go(fw, hop.to, part, on).map(|d| d + add);
                best = match (best, sub) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                };
            }
            on.pop();
            best
        }
        let mut best = Some(0);
        for u in self.deflecting_ases() {
            let d = go(self, u, CubeSet::full(self.width), &mut Vec::new());
            best = match (best, d) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
        }
        best
    }

    /// Follows one packet from `start`.
    pub fn simulate(&self, start: Asn, pkt: &Packet) -> Fate {
        let mut path = vec![start];
        let mut at = start;
        loop {
            if at == self.rib.origin {
                return Fate::Delivered(path);
            }
            let Some(hop) = self.step(at, pkt) else {
                return Fate::Dropped(path);
            };
            if let Some(pos) = path.iter().position(|&a| a == hop.to) {
                // Decisions depend only on (AS, packet), so a revisit is a loop.
                return Fate::Looped { path, cycle_start: pos };
            }
            path.push(hop.to);
            at = hop.to;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fate {
    Delivered(Vec<Asn>),
    Looped { path: Vec<Asn>, cycle_start: usize },
    Dropped(Vec<Asn>),
}

fn canonical(cycle: &[Hop]) -> Vec<Hop> {
    let start = (0..cycle.len()).min_by_key(|&i| cycle[i].from).unwrap_or(0);
    cycle[start..].iter().chain(&cycle[..start]).copied().collect()
}

/// Loops in the forwarding state of `rib` with `policies` active.
pub fn forwarding_oracle<'a>(
    rib: &'a RibState,
    sites: &SdxSites,
    policies: impl IntoIterator<Item = &'a DeflectionPolicy>,
    width: usize,
) -> Vec<Loop> {
    Forwarding::new(rib, sites, policies, width).loops()
}
