//! The five-AS, two-exchange example in which two individually harmless
//! deflections for the same traffic class form a loop.
//!
//! ```text
//!       B ------- N        B and N peer
//!      / \       / \
//!     M   Z -----'   A     Z is a customer of both B and N
//! ```
//!
//! `Z` originates the prefix and is a customer of `B` and `N`; `M` is a
//! customer of `B` and `A` a customer of `N`. `A` routes `A N Z` and `M`
//! routes `M B Z`. If `B` deflects web traffic to `A` at SDX1 and `N`
//! deflects the same traffic to `M` at SDX2, it cycles `B A N M B`.

use std::collections::{BTreeMap, BTreeSet};

use prelude_core::rulespace::PROTO_TCP;
use prelude_core::{Asn, FlowSpec, Prefix, SdxId, TernaryRule};

use crate::graph::AsGraph;
use crate::policy::DeflectionPolicy;
use crate::sites::{SdxSite, SdxSites};
use crate::Network;

pub const A: Asn = Asn(1);
pub const B: Asn = Asn(2);
pub const N: Asn = Asn(3);
pub const M: Asn = Asn(4);
pub const Z: Asn = Asn(5);
pub const SDX1: SdxId = SdxId(1);
pub const SDX2: SdxId = SdxId(2);
pub const PREFIX: Prefix = Prefix(1);

pub fn name(a: Asn) -> &'static str {
    match a {
        A => "A",
        B => "B",
        N => "N",
        M => "M",
        Z => "Z",
        _ => "?",
    }
}

pub fn graph() -> AsGraph {
    let mut g = AsGraph::new();
    g.add_customer_provider(Z, B).unwrap();
    g.add_customer_provider(Z, N).unwrap();
    g.add_customer_provider(M, B).unwrap();
    g.add_customer_provider(A, N).unwrap();
    g.add_peer(B, N).unwrap();
    g
}

pub fn sites() -> SdxSites {
    SdxSites::new([
        SdxSite { id: SDX1, members: BTreeSet::from([A, B, Z]) },
        SdxSite { id: SDX2, members: BTreeSet::from([N, M, Z]) },
    ])
    .unwrap()
}

pub fn network() -> Network {
    Network::new(graph(), sites(), BTreeMap::from([(PREFIX, Z)]))
}

/// TCP traffic to `port`.
pub fn tcp_dst(port: u16) -> TernaryRule {
    FlowSpec::any().with_proto(PROTO_TCP).with_dst_port(port).encode().unwrap()
}

/// `B` deflects `rule` to `A` at SDX1.
pub fn r_b(rule: TernaryRule) -> DeflectionPolicy {
    DeflectionPolicy { id: 1, owner: B, sdx: SDX1, rule, deflect_to: A, prefix: PREFIX }
}

/// `N` deflects `rule` to `M` at SDX2.
pub fn r_n(rule: TernaryRule) -> DeflectionPolicy {
    DeflectionPolicy { id: 2, owner: N, sdx: SDX2, rule, deflect_to: M, prefix: PREFIX }
}
