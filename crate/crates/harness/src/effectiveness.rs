//! Loop-detection effectiveness: replay a policy-arrival sequence and count
//! how often each detector rejects rules that are in fact safe.

use std::collections::BTreeMap;

use prelude_bgpsim::{assign_prefixes, generate_policies, generate_topology, DeflectionPolicy, Forwarding, Network};
use prelude_core::rulespace::FLOW_WIDTH;
use prelude_core::Prefix;
use prelude_ctl::{ControlPlane, Detector, LogLine};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::HarnessError;

/// Detector label of a result row.
pub const DETECTORS: [&str; 3] = ["oracle", "prelude", "sidr"];

/// Counters for one (detector, threshold) pair.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub detector: String,
    pub path_threshold: usize,
    pub installed: u64,
    pub rejected: u64,
    /// Candidates that would close a loop, per the forwarding oracle.
    pub true_loops: u64,
    /// Safe candidates rejected.
    pub false_positives: u64,
    /// Looping candidates accepted.
    pub false_negatives: u64,
    /// Safe candidates seen.
    pub correct_rules: u64,
    pub total: u64,
    /// `false_positives / max(1, correct_rules)`.
    pub fp_rate: String,
    /// `false_positives / max(1, total)`.
    pub fp_rate_all: String,
}

impl ResultRow {
    fn new(seed: u64, detector: &str, t: usize) -> Self {
        ResultRow {
            experiment: "effectiveness".into(),
            seed,
            detector: detector.into(),
            path_threshold: t,
            ..Default::default()
        }
    }

    fn count(&mut self, accepted: bool, looping: bool) {
        self.total += 1;
        if looping {
            self.true_loops += 1;
        } else {
            self.correct_rules += 1;
        }
        match (accepted, looping) {
            (true, true) => self.false_negatives += 1,
            (false, false) => self.false_positives += 1,
            _ => {}
        }
        if accepted {
            self.installed += 1;
        } else {
            self.rejected += 1;
        }
    }

    fn finish(&mut self) {
        self.fp_rate = format!("{:.6}", self.false_positives as f64 / self.correct_rules.max(1) as f64);
        self.fp_rate_all = format!("{:.6}", self.false_positives as f64 / self.total.max(1) as f64);
    }

    pub fn fp_rate_value(&self) -> f64 {
        self.false_positives as f64 / self.correct_rules.max(1) as f64
    }
}

/// Run-level facts reported alongside the rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub n_as: usize,
    pub n_sdx: usize,
    pub n_prefixes: usize,
    pub policies: usize,
    pub looping_policies: usize,
    pub installed: usize,
    /// Most deflections on any walk through the final safe state.
    pub longest_chain: usize,
}

#[derive(Clone, Debug)]
pub struct Effectiveness {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
    /// One `decision` line per (policy, detector, threshold).
    pub log: Vec<LogLine>,
}

/// Builds the network and the shuffled policy sequence for a config.
pub fn scenario(cfg: &ExperimentConfig) -> Result<(Network, Vec<DeflectionPolicy>), HarnessError> {
    let topo = generate_topology(&cfg.topology_params())?;
    let origins = assign_prefixes(&topo.graph, cfg.n_prefixes, cfg.seed);
    let net = Network::new(topo.graph, topo.sites, origins);
    let mut policies = generate_policies(&net.graph, &net.sites, net.ribs(), &cfg.policy_params()).policies;
    policies.shuffle(&mut ChaCha20Rng::seed_from_u64(cfg.seed ^ 0x5eed_0002));
    if cfg.policy.max_policies > 0 {
        policies.truncate(cfg.policy.max_policies);
    }
    Ok((net, policies))
}

fn closes_loop(net: &Network, active: &BTreeMap<Prefix, Vec<DeflectionPolicy>>, p: &DeflectionPolicy) -> bool {
    let rib = net.rib(p.prefix).expect("policy prefix is announced");
    let all = active.get(&p.prefix).into_iter().flatten().chain([p]);
    !Forwarding::new(rib, &net.sites, all, FLOW_WIDTH).loops_via(p).is_empty()
}

/// Replays every policy in arrival order. Each detector judges the
/// candidate against the same state; the candidate is then installed iff
/// the oracle finds it safe, so all detectors see identical histories.
pub fn run_effectiveness(cfg: &ExperimentConfig) -> Result<Effectiveness, HarnessError> {
    let (net, policies) = scenario(cfg)?;
    let mut plane = ControlPlane::new(net.clone(), cfg.evaluation(), FLOW_WIDTH, cfg.seed);
    let budget = *cfg.path_thresholds.last().expect("validated non-empty");
    let mut active: BTreeMap<Prefix, Vec<DeflectionPolicy>> = BTreeMap::new();
    let mut log = Vec::new();
    let mut direct: BTreeMap<(String, usize), ResultRow> = BTreeMap::new();
    let mut looping_policies = 0;
    for (step, p) in policies.iter().enumerate() {
        let looping = closes_loop(&net, &active, p);
        let prelude = plane.trace(p, Detector::Prelude)?;
        let sidr = plane.trace(p, Detector::Sidr)?;
        for &t in &cfg.path_thresholds {
            let verdicts = [
                (DETECTORS[0], !looping),
                (DETECTORS[1], prelude.verdict(t).accepted()),
                (DETECTORS[2], sidr.verdict(t).accepted()),
            ];
            for (detector, accepted) in verdicts {
                direct
                    .entry((detector.to_string(), t))
                    .or_insert_with(|| ResultRow::new(cfg.seed, detector, t))
                    .count(accepted, looping);
                log.push(
                    LogLine::new(step as u64, p.sdx, "decision")
                        .with("policy", p.id)
                        .with("detector", detector)
                        .with("threshold", t)
                        .with("accepted", accepted)
                        .with("looping", looping),
                );
            }
        }
        if looping {
            looping_policies += 1;
        } else {
            plane.install_unchecked(p.clone(), budget)?;
            active.entry(p.prefix).or_default().push(p.clone());
        }
    }
    let rows: Vec<ResultRow> = direct
        .into_values()
        .map(|mut r| {
            r.finish();
            r
        })
        .collect();
    if rows_from_log(cfg.seed, &log)? != rows {
        return Err(HarnessError::Log("rows differ from the decision log".into()));
    }
    let longest_chain = active
        .iter()
        .map(|(prefix, ps)| {
            let rib = net.rib(*prefix).expect("announced");
            Forwarding::new(rib, &net.sites, ps, FLOW_WIDTH).max_deflections().expect("installed state is loop-free")
        })
        .max()
        .unwrap_or(0);
    let summary = Summary {
        seed: cfg.seed,
        n_as: net.graph.len(),
        n_sdx: net.sites.len(),
        n_prefixes: net.origins().len(),
        policies: policies.len(),
        looping_policies,
        installed: policies.len() - looping_policies,
        longest_chain,
    };
    Ok(Effectiveness { rows, summary, log })
}

/// Re-derives the result rows from `decision` log lines, sorted by
/// (detector, threshold).
pub fn rows_from_log(seed: u64, log: &[LogLine]) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rows: BTreeMap<(String, usize), ResultRow> = BTreeMap::new();
    for line in log.iter().filter(|l| l.kind == "decision") {
        let field = |k: &str| line.get(k).ok_or_else(|| HarnessError::Log(format!("missing {k} in `{line}`")));
        let parse_bool = |k: &str| -> Result<bool, HarnessError> {
            field(k)?.parse().map_err(|_| HarnessError::Log(format!("bad {k} in `{line}`")))
        };
        let detector = field("detector")?.to_string();
        let t: usize = field("threshold")?.parse().map_err(|_| HarnessError::Log(format!("bad threshold in `{line}`")))?;
        let row = rows.entry((detector.clone(), t)).or_insert_with(|| ResultRow::new(seed, &detector, t));
        row.count(parse_bool("accepted")?, parse_bool("looping")?);
    }
    Ok(rows
        .into_values()
        .map(|mut r| {
            r.finish();
            r
        })
        .collect())
}

/// Renders the decision log as text, one line per entry.
pub fn render_log(log: &[LogLine]) -> String {
    log.iter().map(|l| format!("{l}\n")).collect()
}
