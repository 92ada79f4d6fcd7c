//! SDX count per deflected path, for Gao-Rexford-compliant and
//! unrestricted deflections.

use std::collections::{BTreeMap, BTreeSet};

use prelude_bgpsim::{assign_prefixes, generate_policies, generate_topology, traversed_sdxes, DeflectionPolicy, Network};
use prelude_core::SdxId;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CdfRow {
    pub curve: String,
    pub sdx_count: usize,
    pub paths: usize,
    pub cdf: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathLen {
    /// Per curve (`gr`, `random`): number of deflected paths per SDX count.
    pub histograms: BTreeMap<String, BTreeMap<usize, usize>>,
    pub rows: Vec<CdfRow>,
}

impl PathLen {
    /// Fraction of the curve's paths with at most `n` exchanges.
    pub fn cdf(&self, curve: &str, n: usize) -> f64 {
        let h = &self.histograms[curve];
        let total: usize = h.values().sum();
        let below: usize = h.range(..=n).map(|(_, c)| c).sum();
        below as f64 / total.max(1) as f64
    }
}

/// Distinct exchanges on the path a deflected packet takes: the deflecting
/// exchange plus every fabric crossed by the target's route.
pub fn sdx_count(net: &Network, p: &DeflectionPolicy) -> Option<usize> {
    let path = net.rib(p.prefix)?.path(p.deflect_to)?;
    let mut seen: BTreeSet<SdxId> = traversed_sdxes(path, &net.sites).into_iter().collect();
    seen.insert(p.sdx);
    Some(seen.len())
}

fn histogram(net: &Network, policies: &[DeflectionPolicy]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for n in policies.iter().filter_map(|p| sdx_count(net, p)) {
        *h.entry(n).or_insert(0) += 1;
    }
    h
}

pub fn run_pathlen(cfg: &ExperimentConfig) -> Result<PathLen, HarnessError> {
    let topo = generate_topology(&cfg.topology_params())?;
    let origins = assign_prefixes(&topo.graph, cfg.n_prefixes, cfg.seed);
    let net = Network::new(topo.graph, topo.sites, origins);
    let mut histograms = BTreeMap::new();
    for (curve, gr_only) in [("gr", true), ("random", false)] {
        let params = prelude_bgpsim::PolicyParams { gr_only, ..cfg.policy_params() };
        let mut policies = generate_policies(&net.graph, &net.sites, net.ribs(), &params).policies;
        // One path per (exchange, owner, target, prefix); match rules do
        // not change the route taken.
        policies.sort_by_key(|p| (p.sdx, p.owner, p.deflect_to, p.prefix));
        policies.dedup_by_key(|p| (p.sdx, p.owner, p.deflect_to, p.prefix));
        histograms.insert(curve.to_string(), histogram(&net, &policies));
    }
    let mut rows = Vec::new();
    for (curve, h) in &histograms {
        let total: usize = h.values().sum();
        let mut acc = 0;
        for (&n, &c) in h {
            acc += c;
            rows.push(CdfRow {
                curve: curve.clone(),
                sdx_count: n,
                paths: c,
                cdf: format!("{:.6}", acc as f64 / total as f64),
            });
        }
    }
    Ok(PathLen { histograms, rows })
}
