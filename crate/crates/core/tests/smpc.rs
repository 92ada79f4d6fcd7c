use std::net::{TcpListener, TcpStream};
use std::thread;
use std::time::Duration;

use prelude_core::bits::Bits;
use prelude_core::circuits::{
    build_batch_query, build_distinct_pair, BooleanCircuit, CircuitBuilder, CircuitLayout, Party,
};
use prelude_core::rulespace::{FlowSpec, TernaryRule};
use prelude_core::smpc::runner::{execute, online_rounds, open_outputs, run_pair, Backend, PairOptions, Reveal};
use prelude_core::smpc::session::{Direction, Phase, Session};
use prelude_core::smpc::{
    dealer_gen, gmw_execute, Channel, Dealer, Frame, FrameKind, LocalChannel, SmpcError, TcpChannel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn random_circuit(rng: &mut ChaCha8Rng) -> BooleanCircuit {
    let mut c = CircuitBuilder::new();
    let na = rng.gen_range(1..=16);
    let nb = rng.gen_range(1..=16);
    let mut wires = c.input(Party::A, "a", na);
    wires.extend(c.input(Party::B, "b", nb));
    for _ in 0..rng.gen_range(1..60) {
        let x = wires[rng.gen_range(0..wires.len())];
        let y = wires[rng.gen_range(0..wires.len())];
        let w = match rng.gen_range(0..3) {
            0 => c.and(x, y).unwrap(),
            1 => c.xor(x, y).unwrap(),
            _ => c.not(x).unwrap(),
        };
        wires.push(w);
    }
    for _ in 0..rng.gen_range(1..8) {
        c.output(wires[rng.gen_range(0..wires.len())]).unwrap();
    }
    c.finish()
}

fn inputs(c: &BooleanCircuit, rng: &mut ChaCha8Rng) -> (Bits, Bits) {
    (Bits::random(c.input_len(Party::A), rng), Bits::random(c.input_len(Party::B), rng))
}

fn rule(lit: &str) -> TernaryRule {
    lit.parse::<FlowSpec>().unwrap().encode().unwrap()
}

#[test]
fn random_circuits_agree_with_plaintext_on_both_backends() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    for i in 0..500 {
        let c = random_circuit(&mut rng);
        c.validate().unwrap();
        let (a, b) = inputs(&c, &mut rng);
        let want = c.evaluate_plaintext(&a, &b).unwrap();
        let mut opts = PairOptions::new(Backend::Gmw);
        opts.nonce = i;
        let gmw = run_pair(&c, &a, &b, &opts).unwrap().output;
        opts.backend = Backend::Yao;
        let yao = run_pair(&c, &a, &b, &opts).unwrap().output;
        assert_eq!(gmw, want, "gmw circuit {i}");
        assert_eq!(yao, want, "yao circuit {i}");
    }
}

#[test]
fn constant_zero_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let c = random_circuit(&mut rng);
        let (a, b) = (Bits::zeros(c.input_len(Party::A)), Bits::zeros(c.input_len(Party::B)));
        let want = c.evaluate_plaintext(&a, &b).unwrap();
        for backend in Backend::ALL {
            assert_eq!(run_pair(&c, &a, &b, &PairOptions::new(backend)).unwrap().output, want);
        }
    }
}

#[test]
fn loop_example_pair_is_overlapping() {
    let c = build_distinct_pair(104).unwrap();
    let l = CircuitLayout::new(1, 104, 1).unwrap();
    let r = rule("proto=tcp,dst_port=80");
    for backend in Backend::ALL {
        let out = run_pair(&c, &l.querier_input(&r), &l.querier_input(&r), &PairOptions::new(backend)).unwrap();
        assert!(!out.output.get(0), "{backend}: identical HTTP rules must overlap");
    }
}

#[test]
fn single_not_gate() {
    let mut cb = CircuitBuilder::new();
    let a = cb.input(Party::A, "a", 1)[0];
    cb.input(Party::B, "b", 0);
    let n = cb.not(a).unwrap();
    cb.output(n).unwrap();
    let c = cb.finish();
    for backend in Backend::ALL {
        let out = run_pair(&c, &Bits::ones(1), &Bits::zeros(0), &PairOptions::new(backend)).unwrap();
        assert!(!out.output.get(0));
    }
}

#[test]
fn batch_of_fifty_matches_oracle_multiset() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let layout = CircuitLayout::new(50, 104, 48).unwrap();
    let c = build_batch_query(&layout).unwrap();
    let q = TernaryRule::random(104, &mut rng);
    // Sparse masks so that a fair share of rules overlap the query.
    let rules: Vec<(TernaryRule, u64)> = (0..50)
        .map(|i| {
            let mut r = TernaryRule::random(104, &mut rng);
            if i % 2 == 0 {
                r = q.clone();
            }
            (r, 1000 + i)
        })
        .collect();
    let dummy = (1 << 48) - 1;
    let mut want: Vec<u64> = rules.iter().map(|(r, id)| if q.overlaps(r).unwrap() { *id } else { dummy }).collect();
    want.sort();
    for backend in Backend::ALL {
        let out = run_pair(&c, &layout.querier_input(&q), &layout.holder_input(&rules, dummy), &PairOptions::new(backend))
            .unwrap();
        let mut got = layout.decode_outputs(&out.output);
        got.sort();
        assert_eq!(got, want, "{backend}");
    }
}

#[test]
fn round_contract() {
    for (k, width) in [(1, 104), (50, 104), (3, 7), (2, 1)] {
        let c = build_batch_query(&CircuitLayout::new(k, width, 48).unwrap()).unwrap();
        let a = Bits::zeros(c.input_len(Party::A));
        let b = Bits::zeros(c.input_len(Party::B));
        for reveal in [Reveal::Both, Reveal::To(Party::A), Reveal::To(Party::B)] {
            let mut opts = PairOptions::new(Backend::Gmw);
            opts.reveal = reveal;
            let gmw = run_pair(&c, &a, &b, &opts).unwrap();
            for t in [&gmw.transcript_a, &gmw.transcript_b] {
                assert_eq!(t.rounds(Phase::Online) as usize, c.and_depth() + 1);
            }
            opts.backend = Backend::Yao;
            let yao = run_pair(&c, &a, &b, &opts).unwrap();
            let want = if reveal == Reveal::To(Party::A) { 2 } else { 3 };
            assert_eq!(online_rounds(Backend::Yao, c.and_depth(), reveal), want);
            for t in [&yao.transcript_a, &yao.transcript_b] {
                assert_eq!(t.rounds(Phase::Online), want);
            }
        }
    }
}

#[test]
fn setup_material_never_travels_online() {
    let c = build_batch_query(&CircuitLayout::new(4, 16, 48).unwrap()).unwrap();
    let a = Bits::zeros(c.input_len(Party::A));
    let b = Bits::zeros(c.input_len(Party::B));
    for backend in Backend::ALL {
        let run = run_pair(&c, &a, &b, &PairOptions::new(backend)).unwrap();
        for t in [&run.transcript_a, &run.transcript_b] {
            for e in t.entries() {
                let setup_kind =
                    matches!(e.kind, FrameKind::SetupTriples | FrameKind::GarbledTables | FrameKind::InputShare);
                assert!(!(setup_kind && e.phase == Phase::Online), "{backend}: {e:?}");
                assert!(e.direction != Direction::FromDealer || e.phase == Phase::Setup);
            }
            assert!(t.bytes(Phase::Setup, Direction::FromDealer) > 0);
        }
    }
}

#[test]
fn transcripts_are_deterministic() {
    let c = build_batch_query(&CircuitLayout::new(3, 8, 48).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (a, b) = inputs(&c, &mut rng);
    for backend in Backend::ALL {
        let opts = PairOptions::new(backend);
        let r1 = run_pair(&c, &a, &b, &opts).unwrap();
        let r2 = run_pair(&c, &a, &b, &opts).unwrap();
        assert_eq!(r1.transcript_a.digest(), r2.transcript_a.digest());
        assert_eq!(r1.transcript_b.digest(), r2.transcript_b.digest());
        let mut other = opts.clone();
        other.seed_b = 99;
        let r3 = run_pair(&c, &a, &b, &other).unwrap();
        assert_ne!(r1.transcript_a.digest(), r3.transcript_a.digest());
        assert_eq!(r1.output, r3.output);
    }
}

#[test]
fn xor_only_circuit_needs_no_triples() {
    let mut cb = CircuitBuilder::new();
    let a = cb.input(Party::A, "a", 3);
    let b = cb.input(Party::B, "b", 3);
    for i in 0..3 {
        let x = cb.xor(a[i], b[i]).unwrap();
        cb.output(x).unwrap();
    }
    let c = cb.finish();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (ma, mb) = dealer_gen(0, 0, Party::B, &mut rng);
    assert!(ma.triples.is_empty() && mb.triples.is_empty());
    let out = run_pair(&c, &Bits::parse("101").unwrap(), &Bits::parse("011").unwrap(), &PairOptions::new(Backend::Gmw))
        .unwrap();
    assert_eq!(out.output, Bits::parse("110").unwrap());
    assert_eq!(out.transcript_a.rounds(Phase::Online), 1);
}

#[test]
fn underprovisioned_setup_is_rejected() {
    let c = build_distinct_pair(4).unwrap();
    let (ca, _cb) = LocalChannel::pair(Duration::ZERO);
    let mut session = Session::new(ca);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (ma, _) = dealer_gen(c.and_count() - 1, 0, Party::B, &mut rng);
    let mut triples = prelude_core::smpc::dealer::TripleSource::new(ma.triples);
    let err = gmw_execute(&c, Party::A, &Bits::zeros(8), &mut session, &mut triples, &mut rng).unwrap_err();
    assert!(matches!(err, SmpcError::TripleExhausted { .. }));
}

#[test]
fn closed_peer_aborts_the_session() {
    let c = build_distinct_pair(4).unwrap();
    let (ca, cb) = LocalChannel::pair(Duration::ZERO);
    drop(cb);
    let mut session = Session::new(ca);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for backend in Backend::ALL {
        let err =
            execute(backend, &c, Party::A, &Bits::zeros(8), &mut session, &Dealer::new(0), 0, &mut rng).unwrap_err();
        assert!(matches!(err, SmpcError::SessionAborted(_)), "{err}");
    }
}

/// Flips every byte of garbled tables in transit.
struct Tamper(LocalChannel);

impl Channel for Tamper {
    fn send(&mut self, frame: Frame) -> Result<(), SmpcError> {
        self.0.send(frame)
    }
    fn recv(&mut self) -> Result<Frame, SmpcError> {
        let mut f = self.0.recv()?;
        if f.kind == FrameKind::GarbledTables {
            f.payload.iter_mut().for_each(|b| *b ^= 0x5A);
        }
        Ok(f)
    }
}

#[test]
fn tampered_tables_fail_integrity() {
    let c = build_distinct_pair(8).unwrap();
    let (ca, cb) = LocalChannel::pair(Duration::ZERO);
    let garbler = thread::spawn({
        let c = c.clone();
        move || {
            let mut s = Session::new(cb);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            execute(Backend::Yao, &c, Party::B, &Bits::zeros(16), &mut s, &Dealer::new(0), 0, &mut rng)
        }
    });
    let mut s = Session::new(Tamper(ca));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let err = execute(Backend::Yao, &c, Party::A, &Bits::zeros(16), &mut s, &Dealer::new(0), 0, &mut rng).unwrap_err();
    assert!(matches!(err, SmpcError::LabelIntegrity { .. }), "{err}");
    drop(s);
    let _ = garbler.join();
}

#[test]
fn runs_over_tcp() {
    let c = build_batch_query(&CircuitLayout::new(2, 16, 48).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (a, b) = inputs(&c, &mut rng);
    let want = c.evaluate_plaintext(&a, &b).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    for backend in Backend::ALL {
        let client = thread::spawn({
            let (c, a) = (c.clone(), a.clone());
            move || {
                let stream = TcpStream::connect(addr).unwrap();
                let mut s = Session::new(TcpChannel::new(stream, Duration::ZERO).unwrap());
                let mut rng = ChaCha8Rng::seed_from_u64(2);
                let share = execute(backend, &c, Party::A, &a, &mut s, &Dealer::new(4), 1, &mut rng).unwrap();
                open_outputs(backend, &mut s, Party::A, &share, Reveal::Both).unwrap().unwrap()
            }
        });
        let (stream, _) = listener.accept().unwrap();
        let mut s = Session::new(TcpChannel::new(stream, Duration::ZERO).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let share = execute(backend, &c, Party::B, &b, &mut s, &Dealer::new(4), 1, &mut rng).unwrap();
        let out_b = open_outputs(backend, &mut s, Party::B, &share, Reveal::Both).unwrap().unwrap();
        assert_eq!(client.join().unwrap(), want);
        assert_eq!(out_b, want);
    }
}

#[test]
fn injected_delay_bounds_online_time() {
    let c = build_batch_query(&CircuitLayout::new(1, 8, 48).unwrap()).unwrap();
    let a = Bits::zeros(c.input_len(Party::A));
    let b = Bits::zeros(c.input_len(Party::B));
    for backend in Backend::ALL {
        let mut opts = PairOptions::new(backend);
        opts.delay = Duration::from_millis(20);
        for reveal in [Reveal::Both, Reveal::To(Party::A)] {
            opts.reveal = reveal;
            let run = run_pair(&c, &a, &b, &opts).unwrap();
            let rounds = run.transcript_a.rounds(Phase::Online);
            let wall = run.transcript_a.wall(Phase::Online).max(run.transcript_b.wall(Phase::Online));
            assert!(wall >= Duration::from_millis(20) * rounds, "{backend} {reveal:?}: {wall:?}");
            if reveal == Reveal::To(Party::A) {
                // The querier's own clock covers the whole critical path.
                assert!(run.transcript_a.wall(Phase::Online) >= Duration::from_millis(20) * rounds);
            }
        }
    }
}

/// Chi-squared p-value of observed ones/zeros against a fair coin.
fn coin_p_value(ones: u64, total: u64) -> f64 {
    let e = total as f64 / 2.0;
    let stat = ((ones as f64 - e).powi(2) + ((total - ones) as f64 - e).powi(2)) / e;
    1.0 - ChiSquared::new(1.0).unwrap().cdf(stat)
}

#[test]
fn querier_view_is_input_independent() {
    let layout = CircuitLayout::new(8, 16, 48).unwrap();
    let c = build_batch_query(&layout).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let q = TernaryRule::random(16, &mut rng);
    let sets: Vec<Vec<(TernaryRule, u64)>> = (0..2)
        .map(|s| (0..8).map(|i| (if s == 0 { q.clone() } else { TernaryRule::random(16, &mut rng) }, i)).collect())
        .collect();
    let mut counts = Vec::new();
    for set in &sets {
        let (mut ones, mut total) = (0u64, 0u64);
        let mut session = 0;
        while total < 100_000 {
            let mut opts = PairOptions::new(Backend::Gmw);
            opts.capture = true;
            opts.nonce = session;
            opts.seed_a = 1000 + session;
            opts.seed_b = 5000 + session;
            session += 1;
            let run = run_pair(&c, &layout.querier_input(&q), &layout.holder_input(set, 0xFFFF), &opts).unwrap();
            for f in run.transcript_a.captured().unwrap() {
                if matches!(f.kind, FrameKind::InputShare | FrameKind::AndOpening) && f.payload.len() > 1 {
                    let body = &f.payload[..f.payload.len() - 1];
                    ones += body.iter().map(|b| b.count_ones() as u64).sum::<u64>();
                    total += 8 * body.len() as u64;
                }
            }
        }
        assert!(coin_p_value(ones, total) > 0.01, "marginal bit frequency {ones}/{total}");
        counts.push((ones, total));
    }
    // 2x2 homogeneity between the two holder rule sets.
    let (o1, t1) = counts[0];
    let (o2, t2) = counts[1];
    let p = (o1 + o2) as f64 / (t1 + t2) as f64;
    let cells = [(o1 as f64, t1 as f64 * p), ((t1 - o1) as f64, t1 as f64 * (1.0 - p)),
        (o2 as f64, t2 as f64 * p), ((t2 - o2) as f64, t2 as f64 * (1.0 - p))];
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    assert!(1.0 - ChiSquared::new(1.0).unwrap().cdf(stat) > 0.01);
}
