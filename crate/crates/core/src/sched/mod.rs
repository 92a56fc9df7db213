//! Link-layer protocols: plain AMC without retransmissions, per-stream
//! HARQ-IR (baseline) and layered HARQ with backtrack decoding (advanced).
//!
//! All three share the same per-block driver contract: the caller supplies
//! the block's AMC rates and the SINRs the users actually experience, a
//! [`DecodeSampler`] turns packet error probabilities into outcomes, and
//! every reward, drop and delay lands in a [`BlockLedger`].

pub mod advanced;
pub mod baseline;
pub mod no_harq;

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::harqmath::{min_retransmission_length, DecodeMode, EmpiricalCdf};
use crate::metrics::BlockLedger;
use crate::phy::{RateAllocation, SinrReport};

pub use advanced::AdvancedScheduler;
pub use baseline::BaselineScheduler;
pub use no_harq::NoHarqScheduler;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamKind {
    Common,
    Private,
}

/// Identifies one packet in a user's feedback: its stream and birth block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamTag {
    pub kind: StreamKind,
    pub birth: usize,
}

impl StreamTag {
    pub fn common(birth: usize) -> Self {
        StreamTag {
            kind: StreamKind::Common,
            birth,
        }
    }

    pub fn private(birth: usize) -> Self {
        StreamTag {
            kind: StreamKind::Private,
            birth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ack {
    Ack,
    Nack,
}

impl Ack {
    pub fn from_success(ok: bool) -> Self {
        if ok {
            Ack::Ack
        } else {
            Ack::Nack
        }
    }

    pub fn is_ack(self) -> bool {
        self == Ack::Ack
    }
}

/// One user's feedback for one block.
///
/// Results follow the decoding order. A trailing run of two or more equal
/// results is sent as a single value, so an all-ACK or all-NACK block costs
/// one bit. Both ends know the tag list, which makes the compression
/// lossless.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Feedback {
    pub tags: Vec<StreamTag>,
    /// Transmitted (possibly compressed) result bits.
    pub bits: Vec<Ack>,
}

impl Feedback {
    pub fn compress(tags: Vec<StreamTag>, results: &[Ack]) -> Result<Self> {
        if tags.len() != results.len() || tags.is_empty() {
            return Err(Error::Feedback(format!(
                "{} results for {} tags",
                results.len(),
                tags.len()
            )));
        }
        let last = *results.last().expect("nonempty");
        let run = results.iter().rev().take_while(|&&r| r == last).count();
        let keep = if run >= 2 {
            results.len() - run + 1
        } else {
            results.len()
        };
        Ok(Feedback {
            tags,
            bits: results[..keep].to_vec(),
        })
    }

    pub fn is_compressed(&self) -> bool {
        self.bits.len() < self.tags.len()
    }

    /// Full per-tag result list.
    pub fn expand(&self) -> Result<Vec<(StreamTag, Ack)>> {
        let Some(&last) = self.bits.last() else {
            return Err(Error::Feedback("empty feedback".into()));
        };
        if self.bits.len() > self.tags.len() {
            return Err(Error::Feedback(format!(
                "{} bits for {} tags",
                self.bits.len(),
                self.tags.len()
            )));
        }
        Ok(self
            .tags
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, self.bits.get(i).copied().unwrap_or(last)))
            .collect())
    }

    /// Single ACK or NACK standing for every stream.
    pub fn single(&self) -> Option<Ack> {
        (self.bits.len() == 1).then(|| self.bits[0])
    }

    pub fn result_for(&self, tag: StreamTag) -> Option<Ack> {
        let i = self.tags.iter().position(|&t| t == tag)?;
        Some(*self.bits.get(i).unwrap_or(self.bits.last()?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecodeKind {
    /// Current (or, for the baseline, combined) common packet.
    Common,
    Private,
    CommonBacktrack { birth: usize },
    PrivateBacktrack { birth: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DecodeEvent {
    pub block: usize,
    pub user: usize,
    pub kind: DecodeKind,
}

/// Turns a packet error probability into a decode outcome.
pub trait DecodeSampler {
    fn decode(&mut self, event: &DecodeEvent, per: f64) -> bool;
}

/// Bernoulli draws, one uniform per decode attempt.
pub struct BernoulliSampler<R> {
    rng: R,
}

impl<R: Rng> BernoulliSampler<R> {
    pub fn new(rng: R) -> Self {
        BernoulliSampler { rng }
    }
}

impl<R: Rng> DecodeSampler for BernoulliSampler<R> {
    fn decode(&mut self, _event: &DecodeEvent, per: f64) -> bool {
        DecodeMode::Stochastic.decide(per, &mut self.rng)
    }
}

/// Success iff PER < 1/2.
#[derive(Clone, Copy, Debug, Default)]
pub struct ThresholdSampler;

impl DecodeSampler for ThresholdSampler {
    fn decode(&mut self, _event: &DecodeEvent, per: f64) -> bool {
        per < 0.5
    }
}

/// Forced outcomes for replaying protocol examples. Events without a
/// script entry take `default` and are recorded in `unscripted`.
#[derive(Clone, Debug, Default)]
pub struct ScriptedSampler {
    pub outcomes: HashMap<DecodeEvent, bool>,
    pub default: bool,
    pub unscripted: Vec<DecodeEvent>,
    pub attempted: Vec<DecodeEvent>,
}

impl ScriptedSampler {
    pub fn new(default: bool) -> Self {
        ScriptedSampler {
            default,
            ..Default::default()
        }
    }

    pub fn set(&mut self, block: usize, user: usize, kind: DecodeKind, ok: bool) -> &mut Self {
        self.outcomes.insert(DecodeEvent { block, user, kind }, ok);
        self
    }
}

impl DecodeSampler for ScriptedSampler {
    fn decode(&mut self, event: &DecodeEvent, _per: f64) -> bool {
        self.attempted.push(*event);
        match self.outcomes.get(event) {
            Some(&ok) => ok,
            None => {
                self.unscripted.push(*event);
                self.default
            }
        }
    }
}

/// Per-user conditional SINR CDFs for the packets born in one block.
#[derive(Clone, Debug)]
pub struct BirthCdfs {
    pub common: Vec<EmpiricalCdf<f64>>,
    pub private: Vec<EmpiricalCdf<f64>>,
}

/// Everything a protocol needs for one block.
#[derive(Clone, Copy, Debug)]
pub struct BlockInput<'a> {
    pub block: usize,
    /// AMC rates chosen from this block's CSIT.
    pub rates: &'a RateAllocation<f64>,
    /// SINRs over the true channel.
    pub sinrs: &'a SinrReport<f64>,
    /// Conditional SINR CDFs for this block's new packets, when the
    /// retransmission sizer needs them.
    pub cdfs: Option<&'a BirthCdfs>,
}

/// What the sizer knows about one receiver of a retransmission.
#[derive(Clone, Copy, Debug)]
pub struct SizingReceiver<'a> {
    pub user: usize,
    pub prior_credits: &'a [u32],
    pub cdf: Option<&'a EmpiricalCdf<f64>>,
}

#[derive(Clone, Copy, Debug)]
pub struct SizingRequest<'a> {
    pub kind: StreamKind,
    /// HARQ round of the retransmission (2 for the first one).
    pub round: usize,
    pub original_bits: u32,
    pub original_rate: f64,
    pub block_length: usize,
    pub receivers: &'a [SizingReceiver<'a>],
}

/// Rule for the number of retransmission bits `α` of one packet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RetxSizer {
    /// `⌈f · original bits⌉`.
    FixedFraction(f64),
    /// Smallest length whose average backtrack PER reaches the target at
    /// every pending receiver; falls back to `fallback_fraction` when a CDF
    /// is missing or the solver reports an error.
    TargetPer { eps: f64, fallback_fraction: f64 },
}

impl Default for RetxSizer {
    fn default() -> Self {
        RetxSizer::FixedFraction(DEFAULT_RETX_FRACTION)
    }
}

pub const DEFAULT_RETX_FRACTION: f64 = 0.15;

impl RetxSizer {
    pub fn needs_cdfs(&self) -> bool {
        matches!(self, RetxSizer::TargetPer { .. })
    }

    /// Retransmission length, clamped to the original packet size.
    pub fn size(&self, req: &SizingRequest<'_>) -> u32 {
        let fixed = |f: f64| (f * f64::from(req.original_bits)).ceil() as u32;
        let raw = match *self {
            RetxSizer::FixedFraction(f) => fixed(f),
            RetxSizer::TargetPer {
                eps,
                fallback_fraction,
            } => {
                let mut worst = 0u32;
                for r in req.receivers {
                    let Some(cdf) = r.cdf else {
                        return fixed(fallback_fraction).min(req.original_bits);
                    };
                    match min_retransmission_length(
                        eps,
                        req.original_rate,
                        r.prior_credits,
                        cdf,
                        req.block_length,
                    ) {
                        Ok(len) => worst = worst.max(len.bits),
                        Err(e) => {
                            log::warn!("retransmission sizing fell back to a fixed fraction: {e}");
                            return fixed(fallback_fraction).min(req.original_bits);
                        }
                    }
                }
                worst
            }
        };
        if raw > req.original_bits {
            log::warn!(
                "retransmission of {raw} bits exceeds the {}-bit packet; clamped",
                req.original_bits
            );
            req.original_bits
        } else {
            raw
        }
    }
}

/// Protocol-independent knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub num_users: usize,
    pub block_length: usize,
    /// `1 + M_c`.
    pub max_rounds_common: usize,
    /// `1 + M_p`, shared by every user.
    pub max_rounds_private: usize,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.block_length == 0 {
            return Err(Error::invalid("num_users/block_length", "must be positive"));
        }
        if self.max_rounds_common == 0 || self.max_rounds_private == 0 {
            return Err(Error::invalid("max_rounds", "must be at least 1"));
        }
        Ok(())
    }

    pub fn max_rounds(&self, kind: StreamKind) -> usize {
        match kind {
            StreamKind::Common => self.max_rounds_common,
            StreamKind::Private => self.max_rounds_private,
        }
    }
}

/// Counters of invariant violations seen while running a protocol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AuditCounters {
    pub payload_mismatch: u64,
    pub credit_causality: u64,
    pub round_overflow: u64,
    pub workload_bound: u64,
}

impl AuditCounters {
    pub fn total(&self) -> u64 {
        self.payload_mismatch + self.credit_causality + self.round_overflow + self.workload_bound
    }

    pub fn merge(&mut self, other: &AuditCounters) {
        self.payload_mismatch += other.payload_mismatch;
        self.credit_causality += other.credit_causality;
        self.round_overflow += other.round_overflow;
        self.workload_bound += other.workload_bound;
    }
}

/// Packet bookkeeping for the conservation check. Common packets count
/// once per (packet, user) pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PacketCensus {
    pub opened: u64,
    pub decoded: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

impl PacketCensus {
    pub fn balanced(&self) -> bool {
        self.opened == self.decoded + self.dropped + self.in_flight
    }

    pub fn merge(&mut self, other: &PacketCensus) {
        self.opened += other.opened;
        self.decoded += other.decoded;
        self.dropped += other.dropped;
        self.in_flight += other.in_flight;
    }
}

/// Common interface used by the simulation driver.
pub trait Protocol {
    fn step(
        &mut self,
        input: &BlockInput<'_>,
        sampler: &mut dyn DecodeSampler,
        ledger: &mut BlockLedger,
    ) -> Result<Vec<Feedback>>;

    /// `(common, private)` census; in-flight counts come from a scan of the
    /// live state.
    fn census(&self) -> [PacketCensus; 2];

    fn audit(&self) -> AuditCounters;

    fn needs_cdfs(&self) -> bool {
        false
    }
}

pub(crate) fn check_input(cfg: &ProtocolConfig, input: &BlockInput<'_>) -> Result<()> {
    let k = cfg.num_users;
    if input.rates.num_users() != k
        || input.rates.common_portions.len() != k
        || input.sinrs.common.len() != k
        || input.sinrs.private.len() != k
    {
        return Err(Error::DimensionMismatch(format!(
            "block input does not describe {k} users"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(n: usize) -> Vec<StreamTag> {
        (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    StreamTag::common(i)
                } else {
                    StreamTag::private(i)
                }
            })
            .collect()
    }

    #[test]
    fn three_case_rule() {
        use Ack::Nack;
        const A: Ack = Ack::Ack;
        let t = vec![StreamTag::common(0), StreamTag::private(0)];
        assert_eq!(Feedback::compress(t.clone(), &[Nack, Nack]).unwrap().bits, vec![Nack]);
        assert_eq!(Feedback::compress(t.clone(), &[A, Nack]).unwrap().bits, vec![A, Nack]);
        assert_eq!(Feedback::compress(t, &[A, A]).unwrap().bits, vec![A]);
    }

    #[test]
    fn trailing_run_only() {
        use Ack::Nack;
        const A: Ack = Ack::Ack;
        let f = Feedback::compress(tags(4), &[A, Nack, A, Nack]).unwrap();
        assert!(!f.is_compressed());
        let f = Feedback::compress(tags(4), &[Nack, A, Nack, Nack]).unwrap();
        assert_eq!(f.bits, vec![Nack, A, Nack]);
        let f = Feedback::compress(tags(3), &[A, Nack, A]).unwrap();
        assert_eq!(f.bits.len(), 3);
    }

    #[test]
    fn codec_round_trips_every_pattern() {
        for n in 1..=8usize {
            for mask in 0..(1u32 << n) {
                let results: Vec<Ack> =
                    (0..n).map(|i| Ack::from_success(mask >> i & 1 == 1)).collect();
                let f = Feedback::compress(tags(n), &results).unwrap();
                let back: Vec<Ack> = f.expand().unwrap().into_iter().map(|(_, a)| a).collect();
                assert_eq!(back, results);
            }
        }
    }

    #[test]
    fn codec_rejects_mismatched_lengths() {
        assert!(Feedback::compress(tags(2), &[Ack::Ack]).is_err());
        assert!(Feedback::compress(vec![], &[]).is_err());
    }

    #[test]
    fn fixed_fraction_sizer() {
        let req = SizingRequest {
            kind: StreamKind::Common,
            round: 2,
            original_bits: 100,
            original_rate: 1.0,
            block_length: 256,
            receivers: &[],
        };
        assert_eq!(RetxSizer::FixedFraction(0.15).size(&req), 15);
        assert_eq!(RetxSizer::FixedFraction(0.151).size(&req), 16);
        assert_eq!(RetxSizer::FixedFraction(1.5).size(&req), 100);
    }

    #[test]
    fn target_sizer_takes_worst_receiver() {
        let good = EmpiricalCdf::new(vec![100.0_f64; 4]).unwrap();
        let poor = EmpiricalCdf::new(vec![0.5, 0.6, 0.7, 0.8]).unwrap();
        let no_credit: [u32; 0] = [];
        let rx = [
            SizingReceiver {
                user: 0,
                prior_credits: &no_credit,
                cdf: Some(&good),
            },
            SizingReceiver {
                user: 1,
                prior_credits: &no_credit,
                cdf: Some(&poor),
            },
        ];
        let req = SizingRequest {
            kind: StreamKind::Common,
            round: 2,
            original_bits: 512,
            original_rate: 2.0,
            block_length: 256,
            receivers: &rx,
        };
        let sizer = RetxSizer::TargetPer {
            eps: 0.1,
            fallback_fraction: 0.15,
        };
        let both = sizer.size(&req);
        let only_good = sizer.size(&SizingRequest {
            receivers: &rx[..1],
            ..req
        });
        assert_eq!(only_good, 0);
        assert!(both > 0 && both <= 512);
    }

    #[test]
    fn scripted_sampler_records_events() {
        let mut s = ScriptedSampler::new(true);
        s.set(1, 0, DecodeKind::Common, false);
        let ev = DecodeEvent {
            block: 1,
            user: 0,
            kind: DecodeKind::Common,
        };
        assert!(!s.decode(&ev, 0.0));
        let other = DecodeEvent { user: 1, ..ev };
        assert!(s.decode(&other, 1.0));
        assert_eq!(s.unscripted, vec![other]);
        assert_eq!(s.attempted.len(), 2);
    }
}
