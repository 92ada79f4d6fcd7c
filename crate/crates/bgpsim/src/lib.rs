//! AS-level Internet model: business relationships, Gao-Rexford routes,
//! exchange sites, deflection policies and an exact forwarding-loop oracle.

pub mod fixture;
pub mod generate;
pub mod gr;
pub mod graph;
pub mod headerspace;
pub mod oracle;
pub mod policy;
pub mod routes;
pub mod sites;

use std::collections::BTreeMap;

use prelude_core::{Asn, Prefix};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub use generate::{generate_topology, GenerateError, Topology, TopologyParams};
pub use gr::gr_compliant;
pub use graph::{AsGraph, GraphError, Relation};
pub use headerspace::CubeSet;
pub use oracle::{forwarding_oracle, Fate, Forwarding, Hop, Loop, Via};
pub use policy::{generate_policies, DeflectionPolicy, PolicyError, PolicyParams, PolicySet};
pub use routes::{compute_routes, is_valley_free, RibState, Route, RouteClass};
pub use sites::{traversed_sdxes, Crossing, SdxSite, SdxSites};

/// A topology change.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeChange {
    AddPeer(Asn, Asn),
    AddCustomerProvider { customer: Asn, provider: Asn },
    Remove(Asn, Asn),
}

/// Topology, exchanges, prefix origins and the routes they induce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Network {
    pub graph: AsGraph,
    pub sites: SdxSites,
    origins: BTreeMap<Prefix, Asn>,
    ribs: BTreeMap<Prefix, RibState>,
}

impl Network {
    pub fn new(graph: AsGraph, sites: SdxSites, origins: BTreeMap<Prefix, Asn>) -> Self {
        let ribs = origins.iter().map(|(&p, &o)| (p, compute_routes(&graph, p, o))).collect();
        Network { graph, sites, origins, ribs }
    }

    pub fn origins(&self) -> &BTreeMap<Prefix, Asn> {
        &self.origins
    }

    pub fn rib(&self, prefix: Prefix) -> Option<&RibState> {
        self.ribs.get(&prefix)
    }

    pub fn ribs(&self) -> &BTreeMap<Prefix, RibState> {
        &self.ribs
    }

    /// Applies a topology change and recomputes routes. Returns the old
    /// routes of every prefix whose routes changed.
    pub fn apply(&mut self, change: EdgeChange) -> Result<BTreeMap<Prefix, RibState>, GraphError> {
        let mut g = self.graph.clone();
        match change {
            EdgeChange::AddPeer(a, b) => g.add_peer(a, b)?,
            EdgeChange::AddCustomerProvider { customer, provider } => g.add_customer_provider(customer, provider)?,
            EdgeChange::Remove(a, b) => {
                g.remove_edge(a, b)?;
            }
        }
        g.validate()?;
        self.graph = g;
        let mut changed = BTreeMap::new();
        for (&p, &o) in &self.origins {
            let new = compute_routes(&self.graph, p, o);
            if new != self.ribs[&p] {
                changed.insert(p, std::mem::replace(self.ribs.get_mut(&p).unwrap(), new));
            }
        }
        Ok(changed)
    }
}

/// Assigns `n` prefixes, numbered from 1, to distinct random origin ASes
/// (with repetition once every AS originates one).
pub fn assign_prefixes(graph: &AsGraph, n: usize, seed: u64) -> BTreeMap<Prefix, Asn> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let ases: Vec<Asn> = graph.ases().collect();
    let mut out = BTreeMap::new();
    let mut pool = Vec::new();
    for i in 0..n {
        if pool.is_empty() {
            pool = ases.clone();
            pool.shuffle(&mut rng);
        }
        out.insert(Prefix(i as u32 + 1), pool.pop().expect("graph is not empty"));
    }
    out
}
