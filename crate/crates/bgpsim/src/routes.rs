//! Gao-Rexford route selection for one destination prefix.
//!
//! Preference: customer routes over peer routes over provider routes, then
//! shorter AS paths, then the lower next-hop AS number. Export: customer
//! routes (and the origin's own) go to everyone; peer and provider routes
//! only to customers. Under these rules the stable state is computed in
//! three passes instead of by simulating BGP messages.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use prelude_core::{Asn, Prefix};

use crate::graph::{AsGraph, Relation};

/// How a route was learned, in decreasing order of preference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RouteClass {
    Origin,
    Customer,
    Peer,
    Provider,
}

impl RouteClass {
    /// Rank where lower is more preferred.
    pub fn rank(self) -> u8 {
        self as u8
    }

    /// The class of a route learned over an edge where the neighbour has
    /// the given relation to us. Exchange-only adjacencies count as peering.
    pub fn from_relation(rel: Option<Relation>) -> RouteClass {
        match rel {
            Some(Relation::Customer) => RouteClass::Customer,
            Some(Relation::Provider) => RouteClass::Provider,
            Some(Relation::Peer) | None => RouteClass::Peer,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Route {
    /// AS path starting with the selecting AS and ending at the origin.
    pub path: Vec<Asn>,
    pub class: RouteClass,
}

impl Route {
    pub fn next_hop(&self) -> Option<Asn> {
        self.path.get(1).copied()
    }

    /// Path without the selecting AS, as carried in BGP.
    pub fn as_path(&self) -> &[Asn] {
        &self.path[1..]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RibState {
    pub prefix: Prefix,
    pub origin: Asn,
    routes: BTreeMap<Asn, Route>,
}

impl RibState {
    pub fn route(&self, a: Asn) -> Option<&Route> {
        self.routes.get(&a)
    }

    pub fn next_hop(&self, a: Asn) -> Option<Asn> {
        self.routes.get(&a).and_then(Route::next_hop)
    }

    pub fn path(&self, a: Asn) -> Option<&[Asn]> {
        self.routes.get(&a).map(|r| r.path.as_slice())
    }

    pub fn routes(&self) -> impl Iterator<Item = (Asn, &Route)> {
        self.routes.iter().map(|(&a, r)| (a, r))
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// Checks that every path extends its next hop's path.
    pub fn is_consistent(&self) -> bool {
        self.routes.iter().all(|(&a, r)| {
            r.path[0] == a
                && match r.next_hop() {
                    None => a == self.origin,
                    Some(n) => self.path(n) == Some(&r.path[1..]),
                }
        })
    }
}

fn better(a: (usize, Asn), b: (usize, Asn)) -> bool {
    a < b
}

/// Stable Gao-Rexford routes of every AS towards `origin`.
pub fn compute_routes(graph: &AsGraph, prefix: Prefix, origin: Asn) -> RibState {
    // (path length, next hop) per AS and pass.
    let mut chosen: BTreeMap<Asn, (usize, Option<Asn>, RouteClass)> = BTreeMap::new();
    if !graph.contains(origin) {
        return RibState { prefix, origin, routes: BTreeMap::new() };
    }
    chosen.insert(origin, (0, None, RouteClass::Origin));

    // Customer routes climb provider edges level by level.
    let mut frontier = vec![origin];
    let mut len = 0;
    while !frontier.is_empty() {
        let mut next: BTreeMap<Asn, Asn> = BTreeMap::new();
        for &x in &frontier {
            for p in graph.providers(x) {
                if chosen.contains_key(&p) {
                    continue;
                }
                let e = next.entry(p).or_insert(x);
                if x < *e {
                    *e = x;
                }
            }
        }
        len += 1;
        for (&p, &nh) in &next {
            chosen.insert(p, (len, Some(nh), RouteClass::Customer));
        }
        frontier = next.into_keys().collect();
    }

    // Peer routes: one peer hop onto a customer (or origin) route.
    let mut peer_routes: BTreeMap<Asn, (usize, Asn)> = BTreeMap::new();
    for (&x, &(l, _, _)) in &chosen {
        for p in graph.peers(x) {
            if chosen.contains_key(&p) {
                continue;
            }
            let cand = (l + 1, x);
            let e = peer_routes.entry(p).or_insert(cand);
            if better(cand, *e) {
                *e = cand;
            }
        }
    }
    for (p, (l, nh)) in peer_routes {
        chosen.insert(p, (l, Some(nh), RouteClass::Peer));
    }

    // Provider routes descend customer edges; settle in (length, next hop) order.
    let mut heap = BinaryHeap::new();
    for (&x, &(l, _, _)) in &chosen {
        for c in graph.customers(x) {
            if !chosen.contains_key(&c) {
                heap.push(Reverse((l + 1, x, c)));
            }
        }
    }
    while let Some(Reverse((l, nh, c))) = heap.pop() {
        if chosen.contains_key(&c) {
            continue;
        }
        chosen.insert(c, (l, Some(nh), RouteClass::Provider));
        for cc in graph.customers(c) {
            if !chosen.contains_key(&cc) {
                heap.push(Reverse((l + 1, c, cc)));
            }
        }
    }

    // Materialise paths, shortest first so next hops are already built.
    let mut order: Vec<(usize, Asn)> = chosen.iter().map(|(&a, &(l, _, _))| (l, a)).collect();
    order.sort();
    let mut routes: BTreeMap<Asn, Route> = BTreeMap::new();
    for (_, a) in order {
        let (_, nh, class) = chosen[&a];
        let path = match nh {
            None => vec![a],
            Some(n) => std::iter::once(a).chain(routes[&n].path.iter().copied()).collect(),
        };
        routes.insert(a, Route { path, class });
    }
    RibState { prefix, origin, routes }
}

/// Independent valley-free check: zero or more customer-to-provider hops,
/// at most one peer hop, then zero or more provider-to-customer hops. A hop
/// between ASes without an edge is treated as a peer hop.
pub fn is_valley_free(graph: &AsGraph, path: &[Asn]) -> bool {
    #[derive(PartialEq, PartialOrd)]
    enum Stage {
        Up,
        Flat,
        Down,
    }
    let mut stage = Stage::Up;
    for w in path.windows(2) {
        match graph.relation(w[0], w[1]) {
            Some(Relation::Provider) => {
                if stage != Stage::Up {
                    return false;
                }
            }
            Some(Relation::Peer) | None => {
                if stage != Stage::Up {
                    return false;
                }
                stage = Stage::Flat;
            }
            Some(Relation::Customer) => stage = Stage::Down,
        }
    }
    true
}
