use std::collections::BTreeSet;

use prelude_core::distinct_match::{
    holder_with, plaintext_answer, query, query_raw, NextHopId, QueryOptions, RuleEntry,
};
use prelude_core::rulespace::TernaryRule;
use prelude_core::smpc::Backend;
use prelude_core::{Asn, Prefix, SdxId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const P: Prefix = Prefix(7);
const OWNER: Asn = Asn(100);

fn entries(rules: &[(TernaryRule, NextHopId)]) -> Vec<RuleEntry> {
    rules
        .iter()
        .enumerate()
        .map(|(i, (r, h))| RuleEntry { id: i as u64, rule: r.clone(), next_hop: *h, owner: OWNER, prefix: P })
        .collect()
}

/// Rules biased towards overlapping: each bit is wild with probability 1/2.
fn loose_rule(width: usize, rng: &mut ChaCha8Rng) -> TernaryRule {
    let s: String = (0..width).map(|_| ["x", "x", "0", "1"][rng.gen_range(0..4)]).collect();
    s.parse().unwrap()
}

#[test]
fn sixty_four_rule_holder_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let width = 12;
    let rules: Vec<(TernaryRule, NextHopId)> = (0..64)
        .map(|_| (loose_rule(width, &mut rng), NextHopId::new(SdxId(rng.gen_range(1..4)), Asn(rng.gen_range(1..20)))))
        .collect();
    let holder = holder_with(SdxId(1), OWNER, P, &rules, 11);
    let table = entries(&rules);
    let mut nonempty = 0;
    for i in 0..200 {
        let q = loose_rule(width, &mut rng);
        let backend = if i % 2 == 0 { Backend::Gmw } else { Backend::Yao };
        let got = query(&q, &holder, P, Some(OWNER), &QueryOptions::new(backend, i)).unwrap().result;
        let want = plaintext_answer(&q, &table);
        nonempty += !want.is_empty() as usize;
        assert_eq!(got, want, "query {i}");
    }
    assert!(nonempty > 50, "oracle answers should not be trivially empty");
}

#[test]
fn full_width_queries_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let rules: Vec<(TernaryRule, NextHopId)> =
        (0..10).map(|i| (loose_rule(104, &mut rng), NextHopId::new(SdxId(2), Asn(i)))).collect();
    let mut queries: Vec<TernaryRule> = (0..10).map(|_| loose_rule(104, &mut rng)).collect();
    queries.push(TernaryRule::wildcard(104));
    let holder = holder_with(SdxId(2), OWNER, P, &rules, 3);
    for (i, q) in queries.iter().enumerate() {
        for backend in Backend::ALL {
            let got = query(q, &holder, P, Some(OWNER), &QueryOptions::new(backend, i as u64)).unwrap().result;
            assert_eq!(got, plaintext_answer(q, &entries(&rules)));
        }
    }
}

#[test]
fn dummy_hygiene() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..30 {
        let rules: Vec<(TernaryRule, NextHopId)> =
            (0..6).map(|i| (TernaryRule::random(6, &mut rng), NextHopId::new(SdxId(1), Asn(i)))).collect();
        let holder = holder_with(SdxId(1), OWNER, P, &rules, trial);
        let q = TernaryRule::random(6, &mut rng);
        let opts = QueryOptions::new(Backend::Gmw, trial);
        let raw = query_raw(&q, &holder, P, Some(OWNER), &opts).unwrap();
        let misses = rules.iter().filter(|(r, _)| !q.overlaps(r).unwrap()).count();
        assert_eq!(raw.iter().filter(|h| h.is_dummy()).count(), misses);
        let result = query(&q, &holder, P, Some(OWNER), &opts).unwrap().result;
        assert!(!result.hops.contains(&NextHopId::DUMMY));
        let raw_set: BTreeSet<NextHopId> = raw.into_iter().filter(|h| !h.is_dummy()).collect();
        assert_eq!(result.hops, raw_set);
    }
}

#[test]
fn holder_learns_only_envelope_and_k() {
    let rules = vec![("1x".parse().unwrap(), NextHopId::new(SdxId(1), Asn(1)))];
    let holder = holder_with(SdxId(1), OWNER, P, &rules, 0);
    let a = query(&"10".parse().unwrap(), &holder, P, Some(OWNER), &QueryOptions::new(Backend::Yao, 4)).unwrap();
    let b = query(&"0x".parse().unwrap(), &holder, P, Some(OWNER), &QueryOptions::new(Backend::Yao, 4)).unwrap();
    assert_eq!(a.served, b.served);
    assert_eq!(a.served.k, 1);
    // Under Yao the holder garbles; with the reveal going to the querier the
    // holder receives only the envelope and the label-transfer corrections.
    let kinds: Vec<_> = a
        .holder
        .entries()
        .iter()
        .filter(|e| e.direction == prelude_core::smpc::Direction::Received)
        .map(|e| e.kind)
        .collect();
    use prelude_core::smpc::FrameKind::*;
    assert_eq!(kinds, vec![VerifyQuery, Labels]);
}

#[test]
fn shuffle_positions_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let q: TernaryRule = "1010xxxx".parse().unwrap();
    let marked = NextHopId::new(SdxId(9), Asn(9));
    let mut rules = vec![(q.clone(), marked)];
    for i in 1..8 {
        rules.push((TernaryRule::random(8, &mut rng), NextHopId::new(SdxId(1), Asn(i))));
    }
    let holder = holder_with(SdxId(1), OWNER, P, &rules, 1234);
    let mut counts = [0u64; 8];
    for n in 0..400 {
        let raw = query_raw(&q, &holder, P, Some(OWNER), &QueryOptions::new(Backend::Gmw, n)).unwrap();
        counts[raw.iter().position(|h| *h == marked).unwrap()] += 1;
    }
    let e = 400.0 / 8.0;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    assert!(1.0 - ChiSquared::new(7.0).unwrap().cdf(stat) > 0.01, "{counts:?}");
}
