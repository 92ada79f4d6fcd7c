//! Seeded synthetic topologies with exchange sites.

use std::collections::BTreeSet;

use prelude_core::{Asn, SdxId};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::graph::AsGraph;
use crate::sites::{SdxSite, SdxSites};

#[derive(Clone, Debug, PartialEq)]
pub struct TopologyParams {
    pub n_as: usize,
    /// The first `n_tier1` ASes form a full peering clique with no providers.
    pub n_tier1: usize,
    /// Every other AS buys transit from 1..=max_providers earlier ASes.
    pub max_providers: usize,
    /// Additional random peer links outside exchanges.
    pub extra_peer_links: usize,
    pub n_sdx: usize,
    pub min_members: usize,
    pub max_members: usize,
    /// Probability that two co-members without an edge peer over the exchange.
    pub ixp_peering: f64,
    pub seed: u64,
}

impl TopologyParams {
    pub fn new(n_as: usize, n_sdx: usize, seed: u64) -> Self {
        TopologyParams {
            n_as,
            n_tier1: 3.min(n_as),
            max_providers: 2,
            extra_peer_links: n_as / 10,
            n_sdx,
            min_members: 3.min(n_as),
            max_members: 12.min(n_as),
            ixp_peering: 0.3,
            seed,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenerateError {
    #[error("unsatisfiable topology parameters: {0}")]
    Unsatisfiable(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub graph: AsGraph,
    pub sites: SdxSites,
}

pub fn generate_topology(p: &TopologyParams) -> Result<Topology, GenerateError> {
    let bad = |m: &str| Err(GenerateError::Unsatisfiable(m.to_string()));
    if p.n_as < 3 {
        return bad("need at least 3 ASes");
    }
    if p.n_tier1 == 0 || p.n_tier1 > p.n_as {
        return bad("tier-1 count must be between 1 and n_as");
    }
    if p.max_providers == 0 {
        return bad("max_providers must be at least 1");
    }
    if p.n_sdx > 0 && (p.min_members < 2 || p.min_members > p.max_members || p.max_members > p.n_as) {
        return bad("exchange membership bounds must satisfy 2 <= min <= max <= n_as");
    }
    if p.n_sdx > u16::MAX as usize - 1 {
        return bad("too many exchanges");
    }
    if !(0.0..=1.0).contains(&p.ixp_peering) {
        return bad("ixp_peering must be a probability");
    }
    let mut rng = ChaCha20Rng::seed_from_u64(p.seed);
    let asn = |i: usize| Asn(i as u32 + 1);
    let mut g = AsGraph::new();
    for i in 0..p.n_as {
        g.add_as(asn(i));
    }
    for i in 0..p.n_tier1 {
        for j in i + 1..p.n_tier1 {
            g.add_peer(asn(i), asn(j)).expect("fresh clique edge");
        }
    }
    for i in p.n_tier1..p.n_as {
        let k = rng.gen_range(1..=p.max_providers.min(i));
        for j in sample(&mut rng, i, k).into_iter() {
            g.add_customer_provider(asn(i), asn(j)).expect("fresh provider edge");
        }
    }
    let mut attempts = 0;
    let mut added = 0;
    while added < p.extra_peer_links && attempts < 20 * p.extra_peer_links + 20 {
        attempts += 1;
        let (a, b) = (asn(rng.gen_range(0..p.n_as)), asn(rng.gen_range(0..p.n_as)));
        if a != b && g.relation(a, b).is_none() {
            g.add_peer(a, b).expect("checked");
            added += 1;
        }
    }
    let mut sites = SdxSites::default();
    for s in 0..p.n_sdx {
        let n = rng.gen_range(p.min_members..=p.max_members);
        let members: BTreeSet<Asn> = sample(&mut rng, p.n_as, n).into_iter().map(asn).collect();
        let list: Vec<Asn> = members.iter().copied().collect();
        for (i, &a) in list.iter().enumerate() {
            for &b in &list[i + 1..] {
                if g.relation(a, b).is_none() && rng.gen_bool(p.ixp_peering) {
                    g.add_peer(a, b).expect("checked");
                }
            }
        }
        sites.insert(SdxSite { id: SdxId(s as u16 + 1), members }).expect("valid site");
    }
    g.validate().map_err(|e| GenerateError::Unsatisfiable(e.to_string()))?;
    Ok(Topology { graph: g, sites })
}
