//! Checks shared by the regular test targets and the acceptance report.
//! Each returns a measurement or panics with a description of the mismatch.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use rsma_harq::harqmath::{
    accumulated_mutual_information, average_backtrack_per, backtrack_per, harq_ir_per,
    min_retransmission_length, reduced_rate, surrogate_params, BacktrackAttempt, DecodeAttempt,
    EmpiricalCdf, HarqCategory,
};
use rsma_harq::metrics::BlockLedger;
use rsma_harq::phy::{RateAllocation, SinrReport};
use rsma_harq::sched::{
    Ack, AdvancedScheduler, BaselineScheduler, BlockInput, DecodeEvent, DecodeKind, Protocol,
    ProtocolConfig, RetxSizer, ScriptedSampler, StreamTag,
};

use super::{backtrack_per as ref_backtrack, ir_per as ref_ir, reduced, rel_err};

const BLOCK_LENGTHS: [usize; 3] = [64, 256, 1024];

/// Number of vectors violating `I_IR ≥ I_CC ≥ I_TypeI`.
pub fn mi_ordering_violations(count: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let exp = Exp::new(0.1).unwrap();
    let mut bad = 0;
    for _ in 0..count {
        let n = rng.random_range(1..=4);
        let v: Vec<f64> = (0..n).map(|_| exp.sample(&mut rng)).collect();
        let ir = accumulated_mutual_information(HarqCategory::IncrementalRedundancy, &v).unwrap();
        let cc = accumulated_mutual_information(HarqCategory::ChaseCombining, &v).unwrap();
        let t1 = accumulated_mutual_information(HarqCategory::TypeI, &v).unwrap();
        if !(ir >= cc && cc >= t1) {
            bad += 1;
        }
    }
    bad
}

/// Worst relative error of the HARQ-IR PER over `points` random inputs.
/// Points whose reference value underflows are redrawn.
pub fn ir_per_worst_error(points: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < points {
        let rounds = rng.random_range(1..=3);
        let history: Vec<f64> = (0..rounds)
            .map(|_| 10f64.powf(rng.random_range(-2.0..3.0)))
            .collect();
        let ns = BLOCK_LENGTHS[rng.random_range(0..3)];
        let rate = rng.random_range(0.05..8.0);
        let want = ref_ir(&history, rate, ns);
        if want < 1e-250 {
            continue;
        }
        let got = harq_ir_per(&DecodeAttempt {
            sinr_history: history,
            first_round_rate: rate,
            block_length: ns,
        })
        .unwrap();
        worst = worst.max(rel_err(got, want));
        checked += 1;
    }
    worst
}

/// Worst relative error of the backtrack PER over `points` random inputs.
pub fn backtrack_per_worst_error(points: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < points {
        let sinr = 10f64.powf(rng.random_range(-2.0..3.0));
        let ns = BLOCK_LENGTHS[rng.random_range(0..3)];
        let rate = rng.random_range(0.05..8.0);
        let credits: Vec<u32> = (0..rng.random_range(0..3))
            .map(|_| rng.random_range(0..200))
            .collect();
        let total: u64 = credits.iter().map(|&b| b as u64).sum();
        let r_hat = reduced(rate, total, ns);
        if r_hat == 0.0 {
            continue;
        }
        let want = ref_backtrack(sinr, r_hat, ns);
        if want < 1e-250 {
            continue;
        }
        let got = backtrack_per(&BacktrackAttempt {
            first_round_sinr: sinr,
            original_rate: rate,
            extracted_bit_credits: credits,
            block_length: ns,
        })
        .unwrap();
        worst = worst.max(rel_err(got, want));
        checked += 1;
    }
    worst
}

/// Worst relative error over the four surrogate parameters. The knees are
/// compared relative to `max(ξ, 1)` since they may sit near zero.
pub fn surrogate_worst_error(points: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let r_hat = rng.random_range(0.01..8.0);
        let ns = BLOCK_LENGTHS[rng.random_range(0..3)];
        let p = surrogate_params(r_hat, ns).unwrap();
        let lambda = (ns as f64 / (2.0 * std::f64::consts::PI * (4f64.powf(r_hat) - 1.0))).sqrt();
        let xi = 2f64.powf(r_hat) - 1.0;
        let half = 1.0 / (2.0 * lambda);
        let scale = xi.max(1.0);
        worst = worst
            .max(rel_err(p.slope, lambda))
            .max(rel_err(p.center, xi))
            .max((p.lower_knee - (xi - half)).abs() / scale)
            .max((p.upper_knee - (xi + half)).abs() / scale);
    }
    worst
}

/// Random empirical CDF of SINR samples scattered around a typical level.
fn random_cdf(rng: &mut ChaCha8Rng) -> EmpiricalCdf<f64> {
    let level = 10f64.powf(rng.random_range(-0.5..2.0));
    let spread = rng.random_range(0.05..1.0);
    let n = rng.random_range(20..300);
    let samples = (0..n)
        .map(|_| level * (1.0 + spread * rng.random_range(-1.0f64..1.0)).max(0.0))
        .collect();
    EmpiricalCdf::new(samples).unwrap()
}

/// Compares the solver with a linear scan on `instances` seeded cases and
/// returns the slowest solve in seconds.
pub fn solver_matches_scan(instances: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let ns = 256;
    let mut slowest = 0.0f64;
    for case in 0..instances {
        let cdf = random_cdf(&mut rng);
        let rate = rng.random_range(0.2..6.0);
        let prior: Vec<u32> = (0..rng.random_range(0..2))
            .map(|_| rng.random_range(0..60))
            .collect();
        let prior_total: u64 = prior.iter().map(|&b| b as u64).sum();
        let target = rng.random_range(0.005..0.3);

        let start = Instant::now();
        let got = min_retransmission_length(target, rate, &prior, &cdf, ns).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());

        let cap = (rate * ns as f64).ceil() as u32;
        let avg = |beta: u32| {
            let r_hat = reduced_rate(rate, prior_total + beta as u64, ns);
            average_backtrack_per(&cdf, &surrogate_params(r_hat, ns).unwrap()).unwrap()
        };
        match (0..=cap).find(|&b| avg(b) <= target) {
            Some(b) => assert!(got.bits == b && !got.saturated, "case {case}: {got:?} vs {b}"),
            None => assert!(got.bits == cap && got.saturated, "case {case}: {got:?}"),
        }
        for scale in [1.5, 2.0, 4.0] {
            let looser = (target * scale).min(0.99);
            let l = min_retransmission_length(looser, rate, &prior, &cdf, ns).unwrap();
            assert!(l.bits <= got.bits, "case {case}: not monotone in the target");
        }
    }
    slowest
}

const NS: usize = 256;
use Ack::Nack;
const A: Ack = Ack::Ack;

fn cfg(k: usize, rounds: usize) -> ProtocolConfig {
    ProtocolConfig {
        num_users: k,
        block_length: NS,
        max_rounds_common: rounds,
        max_rounds_private: rounds,
    }
}

pub fn rates(common: f64, private: f64, k: usize) -> RateAllocation<f64> {
    RateAllocation {
        common_rate: common,
        common_portions: vec![common / k as f64; k],
        private_rates: vec![private; k],
    }
}

pub fn sinrs(k: usize) -> SinrReport<f64> {
    SinrReport {
        common: vec![5.0; k],
        private: vec![5.0; k],
    }
}

pub fn input<'a>(block: usize, r: &'a RateAllocation<f64>, g: &'a SinrReport<f64>) -> BlockInput<'a> {
    BlockInput {
        block,
        rates: r,
        sinrs: g,
        cdfs: None,
    }
}

/// Two users, one retransmission. Block 0: user 1 misses the common packet.
/// Block 1: common and user 1's private packets are retransmitted while
/// user 0 misses its new private packet. Block 2: new common packet with
/// user 0's private retransmission, which fails because its common does.
pub fn baseline_walkthrough() {
    use DecodeKind::*;
    let mut s = BaselineScheduler::new(cfg(2, 2)).unwrap();
    let mut l = BlockLedger::new(2, NS);
    let mut sm = ScriptedSampler::new(true);
    sm.set(0, 0, Common, true)
        .set(0, 0, Private, true)
        .set(0, 1, Common, false)
        .set(1, 0, Private, false)
        .set(1, 1, Common, true)
        .set(1, 1, Private, true)
        .set(2, 0, Common, false)
        .set(2, 1, Common, true)
        .set(2, 1, Private, true);
    let (r, g) = (rates(2.0, 2.0, 2), sinrs(2));

    let b0 = s.run_block(&input(0, &r, &g), &mut sm, &mut l).unwrap();
    assert_eq!(b0.feedback[0].bits, vec![A]);
    assert_eq!(b0.feedback[1].bits, vec![Nack]);

    let b1 = s.run_block(&input(1, &r, &g), &mut sm, &mut l).unwrap();
    assert!(b1.common.is_retx());
    assert!(b1.private[1].is_retx());
    assert!(!b1.private[0].is_retx());
    assert_eq!(b1.feedback[0].bits, vec![A, Nack]);
    assert_eq!(b1.feedback[1].bits, vec![A]);

    let b2 = s.run_block(&input(2, &r, &g), &mut sm, &mut l).unwrap();
    assert!(!b2.common.is_retx());
    assert!(b2.private[0].is_retx());
    assert_eq!(b2.feedback[0].bits, vec![Nack]);
    assert_eq!(b2.feedback[1].bits, vec![A]);

    assert!(sm.unscripted.is_empty(), "{:?}", sm.unscripted);
    // User 0's second private packet ran out of rounds.
    assert!(s.private_process(0).is_none());
    let c = s.census();
    assert!(c[0].balanced() && c[1].balanced());
    assert_eq!(s.audit().total(), 0);
}

/// Two users, two retransmissions. User 1 misses block 0's common packet,
/// so block 1 carries its common and private retransmissions inside the
/// common stream. In block 2 the common payload is too small for all three
/// retransmissions and user 0's is split across the common and its private
/// stream; user 0 recovers packet 1 by backtrack decoding.
pub fn advanced_walkthrough() {
    use DecodeKind::*;
    let mut s = AdvancedScheduler::new(cfg(2, 3), RetxSizer::FixedFraction(0.15)).unwrap();
    let mut l = BlockLedger::new(2, NS);
    let mut sm = ScriptedSampler::new(true);
    sm.set(0, 0, Common, true)
        .set(0, 0, Private, true)
        .set(0, 1, Common, false)
        .set(1, 0, Common, true)
        .set(1, 0, Private, false)
        .set(1, 1, Common, true)
        .set(1, 1, CommonBacktrack { birth: 0 }, false)
        .set(1, 1, Private, true)
        .set(2, 0, Common, true)
        .set(2, 0, Private, false)
        .set(2, 0, PrivateBacktrack { birth: 1 }, true)
        .set(2, 1, Common, true)
        .set(2, 1, CommonBacktrack { birth: 0 }, true)
        .set(2, 1, Private, true)
        .set(2, 1, PrivateBacktrack { birth: 0 }, true);
    let wide = rates(2.0, 2.0, 2);
    let narrow = rates(0.75, 2.0, 2);
    let g = sinrs(2);

    let b0 = s.run_block(&input(0, &wide, &g), &mut sm, &mut l).unwrap();
    assert_eq!(b0.feedback[0].bits, vec![A]);
    assert_eq!(b0.feedback[1].bits, vec![Nack]);

    let b1 = s.run_block(&input(1, &wide, &g), &mut sm, &mut l).unwrap();
    let p = &b1.plan;
    assert_eq!(p.common_payload, 512);
    assert_eq!(p.common_supermessage_bits, 77);
    assert_eq!(p.private_retx.len(), 1);
    assert_eq!((p.private_retx[0].user, p.private_retx[0].in_common), (1, 77));
    assert_eq!(p.new_common_bits_per_user, vec![358, 0]);
    assert!(p.split_records.is_empty() && p.is_exact());
    let fb0 = b1.feedback[0].expand().unwrap();
    assert_eq!(fb0, vec![(StreamTag::common(1), A), (StreamTag::private(1), Nack)]);
    assert_eq!(b1.feedback[1].bits, vec![A, Nack, A, Nack]);
    assert_eq!(
        b1.feedback[1].tags,
        vec![
            StreamTag::common(1),
            StreamTag::common(0),
            StreamTag::private(1),
            StreamTag::private(0)
        ]
    );

    let b2 = s.run_block(&input(2, &narrow, &g), &mut sm, &mut l).unwrap();
    let p = &b2.plan;
    assert_eq!(p.common_payload, 192);
    let order: Vec<_> = p.private_retx.iter().map(|r| (r.user, r.birth, r.round)).collect();
    assert_eq!(order, vec![(1, 0, 3), (0, 1, 2)]);
    assert_eq!(p.split_records.len(), 1);
    let split = p.split_records[0];
    assert_eq!((split.user, split.birth, split.round), (0, 1, 2));
    assert_eq!((split.bits_in_common, split.bits_in_private), (38, 39));
    assert_eq!(p.private_remainder, vec![39, 0]);
    assert_eq!(p.new_private_bits, vec![473, 512]);
    assert!(p.is_exact());
    assert_eq!(
        b2.feedback[0].tags,
        vec![StreamTag::common(2), StreamTag::private(2), StreamTag::private(1)]
    );
    assert_eq!(b2.feedback[0].bits, vec![A, Nack, A]);
    assert_eq!(b2.feedback[1].single(), Some(A));

    assert!(sm.unscripted.is_empty(), "{:?}", sm.unscripted);
    assert!(!sm.attempted.contains(&DecodeEvent {
        block: 1,
        user: 1,
        kind: PrivateBacktrack { birth: 0 }
    }));
    assert_eq!(s.audit().total(), 0);
    let c = s.census();
    assert!(c[0].balanced() && c[1].balanced());
}
