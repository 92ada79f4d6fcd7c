//! Deflection policies and their seeded generation.

use std::collections::BTreeMap;

use prelude_core::rulespace::{PROTO_TCP, PROTO_UDP};
use prelude_core::{Asn, FlowSpec, Prefix, SdxId, TernaryRule};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::gr::gr_compliant;
use crate::graph::AsGraph;
use crate::routes::RibState;
use crate::sites::SdxSites;

/// An exchange member's rule sending matching traffic for `prefix` to
/// `deflect_to` instead of its BGP next hop.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DeflectionPolicy {
    pub id: u64,
    pub owner: Asn,
    pub sdx: SdxId,
    pub rule: TernaryRule,
    pub deflect_to: Asn,
    pub prefix: Prefix,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("{asn} is not a member of {sdx}")]
    NotMember { asn: Asn, sdx: SdxId },
    #[error("{0} has no route to the prefix")]
    NoRoute(Asn),
    #[error("deflecting to the BGP next hop {0} is not a deflection")]
    NotADeflection(Asn),
    #[error("prefix mismatch")]
    WrongPrefix,
}

impl DeflectionPolicy {
    pub fn validate(&self, sites: &SdxSites, rib: &RibState) -> Result<(), PolicyError> {
        for asn in [self.owner, self.deflect_to] {
            if !sites.is_member(self.sdx, asn) {
                return Err(PolicyError::NotMember { asn, sdx: self.sdx });
            }
        }
        if rib.prefix != self.prefix {
            return Err(PolicyError::WrongPrefix);
        }
        if rib.route(self.deflect_to).is_none() {
            return Err(PolicyError::NoRoute(self.deflect_to));
        }
        if rib.next_hop(self.owner) == Some(self.deflect_to) || self.owner == self.deflect_to {
            return Err(PolicyError::NotADeflection(self.deflect_to));
        }
        Ok(())
    }

    /// Whether the policy changes forwarding under `rib`: the owner's BGP
    /// next hop is reached across this exchange and the target differs.
    pub fn is_effective(&self, sites: &SdxSites, rib: &RibState) -> bool {
        self.prefix == rib.prefix
            && sites.is_member(self.sdx, self.owner)
            && rib.route(self.deflect_to).is_some()
            && self.deflect_to != self.owner
            && match rib.next_hop(self.owner) {
                Some(n) => n != self.deflect_to && sites.is_member(self.sdx, n),
                None => false,
            }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub seed: u64,
    /// Share of the other members each member deflects towards.
    pub target_share: f64,
    pub max_targets: usize,
    pub max_matches_per_target: usize,
    /// Keep only Gao-Rexford compliant deflections.
    pub gr_only: bool,
    pub first_id: u64,
}

impl PolicyParams {
    pub fn new(seed: u64) -> Self {
        PolicyParams { seed, target_share: 0.2, max_targets: 50, max_matches_per_target: 4, gr_only: false, first_id: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PolicySet {
    pub policies: Vec<DeflectionPolicy>,
    /// (exchange, member) pairs for which no route qualified.
    pub skipped_members: usize,
    /// Chosen targets per (exchange, member).
    pub targets: BTreeMap<(SdxId, Asn), Vec<Asn>>,
}

/// Number of deflection targets for a member of an exchange with `members` members.
pub fn target_count(members: usize, share: f64, cap: usize) -> usize {
    (((members.saturating_sub(1)) as f64 * share).ceil() as usize).min(cap)
}

/// TCP or UDP with one random source or destination port.
pub fn random_match<R: Rng + ?Sized>(rng: &mut R) -> TernaryRule {
    let proto = if rng.gen_bool(0.5) { PROTO_TCP } else { PROTO_UDP };
    let port: u16 = rng.gen();
    let spec = FlowSpec::any().with_proto(proto);
    let spec = if rng.gen_bool(0.5) { spec.with_src_port(port) } else { spec.with_dst_port(port) };
    spec.encode().expect("ports with tcp/udp are valid")
}

/// Generates deflection policies for every exchange member. Each member
/// picks `target_count` other members and 1..=max_matches_per_target match
/// rules per target, and applies each rule to every prefix the target
/// announces to it and for which the deflection would take effect.
pub fn generate_policies(
    graph: &AsGraph,
    sites: &SdxSites,
    ribs: &BTreeMap<Prefix, RibState>,
    params: &PolicyParams,
) -> PolicySet {
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    let mut out = PolicySet::default();
    let mut next_id = params.first_id;
    for site in sites.iter() {
        let members: Vec<Asn> = site.members.iter().copied().collect();
        for &u in &members {
            let others: Vec<Asn> = members.iter().copied().filter(|&m| m != u).collect();
            let n = target_count(members.len(), params.target_share, params.max_targets).min(others.len());
            let mut targets: Vec<Asn> = sample(&mut rng, others.len(), n).into_iter().map(|i| others[i]).collect();
            targets.sort();
            let mut produced = 0;
            for &v in &targets {
                let n_match = rng.gen_range(1..=params.max_matches_per_target.max(1));
                let matches: Vec<TernaryRule> = (0..n_match).map(|_| random_match(&mut rng)).collect();
                for rib in ribs.values() {
                    let Some(nh) = rib.next_hop(u) else { continue };
                    let Some(path_v) = rib.path(v) else { continue };
                    if nh == v || !site.members.contains(&nh) || path_v.contains(&u) {
                        continue;
                    }
                    for rule in &matches {
                        let p = DeflectionPolicy {
                            id: next_id,
                            owner: u,
                            sdx: site.id,
                            rule: rule.clone(),
                            deflect_to: v,
                            prefix: rib.prefix,
                        };
                        if params.gr_only && !gr_compliant(&p, rib, graph) {
                            continue;
                        }
                        next_id += 1;
                        produced += 1;
                        out.policies.push(p);
                    }
                }
            }
            if produced == 0 {
                out.skipped_members += 1;
            }
            out.targets.insert((site.id, u), targets);
        }
    }
    out
}
