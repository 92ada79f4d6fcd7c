//! AS-level topology with customer-provider and peer relationships.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use prelude_core::Asn;
use thiserror::Error;

/// How `b` relates to `a`, seen from `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    /// `b` is a customer of `a`.
    Customer,
    /// `b` is a settlement-free peer of `a`.
    Peer,
    /// `b` is a provider of `a`.
    Provider,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop on {0}")]
    SelfLoop(Asn),
    #[error("duplicate edge between {0} and {1}")]
    DuplicateEdge(Asn, Asn),
    #[error("provider hierarchy contains a cycle through {0}")]
    ProviderCycle(Asn),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown AS {0}")]
    UnknownAs(Asn),
    #[error("no edge between {0} and {1}")]
    NoEdge(Asn, Asn),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Adjacency {
    customers: BTreeSet<Asn>,
    providers: BTreeSet<Asn>,
    peers: BTreeSet<Asn>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AsGraph {
    adj: BTreeMap<Asn, Adjacency>,
}

impl AsGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_as(&mut self, a: Asn) {
        self.adj.entry(a).or_default();
    }

    pub fn contains(&self, a: Asn) -> bool {
        self.adj.contains_key(&a)
    }

    pub fn ases(&self) -> impl Iterator<Item = Asn> + '_ {
        self.adj.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    fn check_new_edge(&self, a: Asn, b: Asn) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if self.relation(a, b).is_some() {
            return Err(GraphError::DuplicateEdge(a, b));
        }
        Ok(())
    }

    /// Adds a customer-to-provider edge. Does not check for hierarchy cycles;
    /// see [`AsGraph::validate`].
    pub fn add_customer_provider(&mut self, customer: Asn, provider: Asn) -> Result<(), GraphError> {
        self.check_new_edge(customer, provider)?;
        self.adj.entry(customer).or_default().providers.insert(provider);
        self.adj.entry(provider).or_default().customers.insert(customer);
        Ok(())
    }

    pub fn add_peer(&mut self, a: Asn, b: Asn) -> Result<(), GraphError> {
        self.check_new_edge(a, b)?;
        self.adj.entry(a).or_default().peers.insert(b);
        self.adj.entry(b).or_default().peers.insert(a);
        Ok(())
    }

    pub fn remove_edge(&mut self, a: Asn, b: Asn) -> Result<Relation, GraphError> {
        let rel = self.relation(a, b).ok_or(GraphError::NoEdge(a, b))?;
        let (x, y) = (self.adj.get_mut(&a).unwrap(), b);
        x.customers.remove(&y);
        x.providers.remove(&y);
        x.peers.remove(&y);
        let z = self.adj.get_mut(&b).unwrap();
        z.customers.remove(&a);
        z.providers.remove(&a);
        z.peers.remove(&a);
        Ok(rel)
    }

    /// How `b` relates to `a`, if they share an edge.
    pub fn relation(&self, a: Asn, b: Asn) -> Option<Relation> {
        let adj = self.adj.get(&a)?;
        if adj.customers.contains(&b) {
            Some(Relation::Customer)
        } else if adj.providers.contains(&b) {
            Some(Relation::Provider)
        } else if adj.peers.contains(&b) {
            Some(Relation::Peer)
        } else {
            None
        }
    }

    pub fn customers(&self, a: Asn) -> impl Iterator<Item = Asn> + '_ {
        self.adj.get(&a).into_iter().flat_map(|x| x.customers.iter().copied())
    }

    pub fn providers(&self, a: Asn) -> impl Iterator<Item = Asn> + '_ {
        self.adj.get(&a).into_iter().flat_map(|x| x.providers.iter().copied())
    }

    pub fn peers(&self, a: Asn) -> impl Iterator<Item = Asn> + '_ {
        self.adj.get(&a).into_iter().flat_map(|x| x.peers.iter().copied())
    }

    /// Every edge once: `(a, b, Relation of b seen from a)` with customer
    /// edges reported from the provider side and peer edges with `a < b`.
    pub fn edges(&self) -> Vec<(Asn, Asn, Relation)> {
        let mut out = Vec::new();
        for (&a, adj) in &self.adj {
            for &c in &adj.customers {
                out.push((a, c, Relation::Customer));
            }
            for &p in adj.peers.iter().filter(|&&p| p > a) {
                out.push((a, p, Relation::Peer));
            }
        }
        out
    }

    /// Checks that the customer-to-provider relation is acyclic.
    pub fn validate(&self) -> Result<(), GraphError> {
        // Kahn's algorithm over customer -> provider edges.
        let mut indeg: BTreeMap<Asn, usize> = self.adj.keys().map(|&a| (a, 0)).collect();
        for adj in self.adj.values() {
            for p in &adj.providers {
                *indeg.get_mut(p).ok_or(GraphError::UnknownAs(*p))? += 1;
            }
        }
        let mut ready: Vec<Asn> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&a, _)| a).collect();
        let mut seen = 0;
        while let Some(a) = ready.pop() {
            seen += 1;
            for p in self.providers(a) {
                let d = indeg.get_mut(&p).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(p);
                }
            }
        }
        if seen == self.adj.len() {
            Ok(())
        } else {
            let stuck = indeg.into_iter().find(|(_, d)| *d > 0).map(|(a, _)| a).unwrap();
            Err(GraphError::ProviderCycle(stuck))
        }
    }

    /// Parses relationship lines `a|b|-1` (a is a provider of b) and
    /// `a|b|0` (peers). Blank lines and `#` comments are skipped; extra
    /// trailing fields are ignored.
    pub fn parse_relationships(text: &str) -> Result<AsGraph, GraphError> {
        let mut g = AsGraph::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| GraphError::Parse { line: i + 1, msg: msg.to_string() };
            let mut parts = line.split('|');
            let mut num = |what: &str| -> Result<String, GraphError> {
                parts.next().map(|s| s.trim().to_string()).ok_or_else(|| err(&format!("missing {what}")))
            };
            let a: u32 = num("first AS")?.parse().map_err(|_| err("bad first AS"))?;
            let b: u32 = num("second AS")?.parse().map_err(|_| err("bad second AS"))?;
            let rel = num("relationship")?;
            let (a, b) = (Asn(a), Asn(b));
            match rel.as_str() {
                "-1" => g.add_customer_provider(b, a),
                "0" => g.add_peer(a, b),
                other => return Err(err(&format!("unknown relationship {other:?}"))),
            }
            .map_err(|e| err(&e.to_string()))?;
        }
        g.validate()?;
        Ok(g)
    }

    pub fn to_relationships(&self) -> String {
        let mut s = String::new();
        for (a, b, rel) in self.edges() {
            let code = if rel == Relation::Customer { "-1" } else { "0" };
            let _ = writeln!(s, "{}|{}|{}", a.0, b.0, code);
        }
        s
    }
}
