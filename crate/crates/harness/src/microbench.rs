//! Distinct-Match cost per (backend, delay, rule count): rounds and bytes
//! are exact; wall time is informative.

use std::time::Duration;

use prelude_core::circuits::{build_batch_query, CircuitLayout, Party, DEFAULT_ID_WIDTH};
use prelude_core::distinct_match::{holder_with, query, NextHopId, QueryOptions};
use prelude_core::rulespace::FLOW_WIDTH;
use prelude_core::smpc::{online_rounds, Backend, Phase, Reveal};
use prelude_core::{Asn, Prefix, SdxId, TernaryRule};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use statrs::statistics::Statistics;

use crate::config::{delay_preset, ConfigError, ExperimentConfig};
use crate::HarnessError;

const PREFIX: Prefix = Prefix(1);
const OWNER: Asn = Asn(1);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub backend: String,
    pub delay_ms: u64,
    pub rules: usize,
    pub repetitions: usize,
    pub and_depth: usize,
    pub and_gates: usize,
    /// Rounds the protocol needs for this circuit.
    pub expected_rounds: u32,
    pub online_rounds: u32,
    pub setup_bytes: usize,
    pub online_bytes: usize,
    pub wall_mean_ms: f64,
    pub wall_stdev_ms: f64,
    /// Two one-way delays: a plain request and reply.
    pub baseline_ms: u64,
}

/// Measures one cell. Rounds and byte counts must agree across repetitions.
pub fn bench_cell(backend: Backend, delay: Duration, k: usize, reps: usize, seed: u64) -> Result<BenchRow, HarnessError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ k as u64);
    let rules: Vec<(TernaryRule, NextHopId)> = (0..k)
        .map(|i| (TernaryRule::random(FLOW_WIDTH, &mut rng), NextHopId::new(SdxId(1), Asn(i as u32 + 2))))
        .collect();
    let holder = holder_with(SdxId(1), OWNER, PREFIX, &rules, seed);
    let circuit = build_batch_query(&CircuitLayout::new(k, FLOW_WIDTH, DEFAULT_ID_WIDTH)?)?;
    let local = TernaryRule::random(FLOW_WIDTH, &mut rng);
    let mut counts = None;
    let mut walls = Vec::with_capacity(reps);
    for rep in 0..reps.max(1) {
        let opts = QueryOptions { delay, dealer_seed: seed, ..QueryOptions::new(backend, rep as u64) };
        let run = query(&local, &holder, PREFIX, Some(OWNER), &opts)?;
        let q = &run.querier;
        let c = (q.rounds(Phase::Online), q.link_bytes(Phase::Setup), q.link_bytes(Phase::Online));
        if counts.is_some_and(|prev| prev != c) {
            return Err(HarnessError::Unstable(format!("{backend} k={k}: {counts:?} then {c:?}")));
        }
        counts = Some(c);
        walls.push(q.wall(Phase::Online).as_secs_f64() * 1000.0);
    }
    let (rounds, setup_bytes, online_bytes) = counts.expect("at least one repetition");
    let stdev = if walls.len() > 1 { walls.iter().std_dev() } else { 0.0 };
    Ok(BenchRow {
        backend: backend.to_string(),
        delay_ms: delay.as_millis() as u64,
        rules: k,
        repetitions: walls.len(),
        and_depth: circuit.and_depth(),
        and_gates: circuit.and_count(),
        expected_rounds: online_rounds(backend, circuit.and_depth(), Reveal::To(Party::A)),
        online_rounds: rounds,
        setup_bytes,
        online_bytes,
        wall_mean_ms: walls.iter().mean(),
        wall_stdev_ms: stdev,
        baseline_ms: 2 * delay.as_millis() as u64,
    })
}

pub fn run_microbench(cfg: &ExperimentConfig) -> Result<Vec<BenchRow>, HarnessError> {
    let mb = &cfg.microbench;
    let mut rows = Vec::new();
    for name in &mb.backends {
        let backend: Backend = name.parse().map_err(|_| ConfigError::Backend(name.clone()))?;
        for d in &mb.delays {
            let delay = delay_preset(d)?;
            for &k in &mb.rule_counts {
                log::info!("microbench {backend} {d} k={k}");
                rows.push(bench_cell(backend, delay, k, mb.repetitions, cfg.seed)?);
            }
        }
    }
    Ok(rows)
}
