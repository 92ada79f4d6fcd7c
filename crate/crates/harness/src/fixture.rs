//! Replay of the two-exchange example: B deflects web traffic to A at
//! SDX1, then N tries to deflect the same traffic to M at SDX2 (closing
//! B A N M B), then N deflects ssh instead.

use prelude_bgpsim::fixture::{network, r_b, r_n, tcp_dst};
use prelude_bgpsim::DeflectionPolicy;
use prelude_core::rulespace::FLOW_WIDTH;
use prelude_ctl::{ControlPlane, Evaluation, Verdict, VerifyRequest};
use serde::Serialize;

use crate::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixtureRow {
    pub policy: u64,
    pub owner: String,
    pub sdx: String,
    pub deflect_to: String,
    pub dst_port: u16,
    pub prelude: String,
    pub sidr: String,
}

pub fn fixture_policies() -> Vec<(DeflectionPolicy, u16)> {
    let ssh = DeflectionPolicy { id: 3, ..r_n(tcp_dst(22)) };
    vec![(r_b(tcp_dst(80)), 80), (r_n(tcp_dst(80)), 80), (ssh, 22)]
}

/// Each rule is checked by the baseline first (no side effects), then by
/// the verifier, which installs it if accepted.
pub fn run_verify_fixture(eval: Evaluation, budget: usize) -> Result<Vec<FixtureRow>, HarnessError> {
    let mut plane = ControlPlane::new(network(), eval, FLOW_WIDTH, 0);
    let mut rows = Vec::new();
    for (p, port) in fixture_policies() {
        let req = VerifyRequest::new(p.clone(), budget);
        let sidr: Verdict = plane.sidr_baseline(&req)?;
        let prelude = plane.handle_install(req)?;
        rows.push(FixtureRow {
            policy: p.id,
            owner: p.owner.to_string(),
            sdx: p.sdx.to_string(),
            deflect_to: p.deflect_to.to_string(),
            dst_port: port,
            prelude: prelude.to_string(),
            sidr: sidr.to_string(),
        });
    }
    Ok(rows)
}
