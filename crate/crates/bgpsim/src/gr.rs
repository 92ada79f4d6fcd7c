//! Gao-Rexford compliance of a deflection.

use crate::graph::{AsGraph, Relation};
use crate::policy::DeflectionPolicy;
use crate::routes::{RibState, RouteClass};

/// A deflection from `u` to `v` is compliant when `v` would legitimately
/// export its route to `u` (it is `u`'s provider, or its route is a
/// customer route), `u` would prefer a route learned from `v` at least as
/// much as its current one, and `v`'s path avoids `u`. Exchange members
/// without a direct edge count as peers.
pub fn gr_compliant(policy: &DeflectionPolicy, rib: &RibState, graph: &AsGraph) -> bool {
    let (u, v) = (policy.owner, policy.deflect_to);
    let (Some(ru), Some(rv)) = (rib.route(u), rib.route(v)) else {
        return false;
    };
    if rv.path.contains(&u) {
        return false;
    }
    let rel = graph.relation(u, v);
    let exportable = rel == Some(Relation::Provider) || matches!(rv.class, RouteClass::Customer | RouteClass::Origin);
    exportable && RouteClass::from_relation(rel).rank() <= ru.class.rank()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routes::compute_routes;
    use prelude_core::{Asn, Prefix, SdxId, TernaryRule};

    fn policy(owner: u32, to: u32) -> DeflectionPolicy {
        DeflectionPolicy {
            id: 1,
            owner: Asn(owner),
            sdx: SdxId(1),
            rule: TernaryRule::wildcard(8),
            deflect_to: Asn(to),
            prefix: Prefix(0),
        }
    }

    #[test]
    fn preference_rules() {
        // 1 is the origin; 2 and 3 are its providers; 4 is a provider of 2 and 3; 5 is a provider of 4.
        let g = AsGraph::parse_relationships("2|1|-1\n3|1|-1\n4|2|-1\n4|3|-1\n5|4|-1\n").unwrap();
        let rib = compute_routes(&g, Prefix(0), Asn(1));
        // 4 uses customer 2; deflecting to customer 3 keeps the preference.
        assert!(gr_compliant(&policy(4, 3), &rib, &g));
        // 4 has a customer route; its provider 5 is less preferred.
        assert!(!gr_compliant(&policy(4, 5), &rib, &g));
        // 2 has a customer route; 3 is not adjacent (exchange peer) and has a customer route.
        assert!(!gr_compliant(&policy(2, 3), &rib, &g));
        // 5 reaches 1 through its customer 4; 3 is only an exchange peer.
        assert!(!gr_compliant(&policy(5, 3), &rib, &g));
    }

    #[test]
    fn provider_route_may_go_to_peer_with_customer_route() {
        // 3 is a customer of 4; 4 peers with 2; 2 is a provider of origin 1.
        let g = AsGraph::parse_relationships("4|3|-1\n2|1|-1\n4|2|0\n5|3|-1\n5|2|0\n").unwrap();
        let rib = compute_routes(&g, Prefix(0), Asn(1));
        assert_eq!(rib.route(Asn(3)).unwrap().class, RouteClass::Provider);
        // 3 is not adjacent to 2: an exchange peer with a customer route.
        assert!(gr_compliant(&policy(3, 2), &rib, &g));
        // Path of 5 is 5 2 1; a provider may always be used from a provider route.
        assert!(gr_compliant(&policy(3, 5), &rib, &g));
    }
}
